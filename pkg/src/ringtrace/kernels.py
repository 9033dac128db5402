"""Kernel backend selection.

The compiled extension is preferred; set ``RINGTRACE_PURE_PYTHON=1`` to force
the pure-Python fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("RINGTRACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

leave_one_out_hashes = _impl.leave_one_out_hashes
unique_age_slots = _impl.unique_age_slots
reaction_fixpoint = _impl.reaction_fixpoint

__all__ = ["BACKEND", "leave_one_out_hashes", "unique_age_slots", "reaction_fixpoint"]
