"""Pure-Python versions of the hot kernels.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is unavailable or ``RINGTRACE_PURE_PYTHON=1`` is set.
"""
from __future__ import annotations

import random

import numpy as np

MASK64 = (1 << 64) - 1
SIZE_SALT = 0x5BD1E9955BD1E995


def mix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def leave_one_out_hashes(ring_offsets, ring_members):
    """Hash of each ring with one slot removed, aligned with ``ring_members``.

    The set hash is a wrapping sum of mixed members, so dropping a member is
    one subtraction and member order does not matter.
    """
    offsets = ring_offsets.tolist()
    members = ring_members.tolist()
    out = [0] * len(members)
    for r in range(len(offsets) - 1):
        lo, hi = offsets[r], offsets[r + 1]
        mixed = [mix64(m) for m in members[lo:hi]]
        total = sum(mixed) & MASK64
        salt = mix64((hi - lo) ^ SIZE_SALT)
        for i, h in enumerate(mixed):
            out[lo + i] = mix64(((total - h) & MASK64) ^ salt)
    return np.array(out, dtype=np.uint64)


def unique_age_slots(ring_offsets, ring_members, ring_height, out_height, target):
    """Per ring, the slot holding the only member aged exactly ``target``; -1 otherwise."""
    offsets = ring_offsets.tolist()
    members = ring_members.tolist()
    heights = ring_height.tolist()
    created = out_height.tolist()
    out = [-1] * (len(offsets) - 1)
    for r in range(len(offsets) - 1):
        spend = heights[r]
        found = -1
        for s in range(offsets[r], offsets[r + 1]):
            if spend - created[members[s]] == target:
                if found >= 0:
                    found = -1
                    break
                found = s
        out[r] = found
    return np.array(out, dtype=np.int64)


def reaction_fixpoint(ring_offsets, ring_members, ref_offsets, ref_rings, decoy, true_spend,
                      shuffle_seed=None):
    """Chain-reaction closure over slot flags.

    A slot is eliminated when it is flagged decoy, when its output is a true
    spend in another ring, or when another slot of its ring is a true spend.
    Rings left with one live slot promote it. Promotions are applied in
    synchronous rounds, so the result does not depend on visiting order
    (``shuffle_seed`` permutes each round to exercise that).

    Returns ``(true_spend, contradiction)``: updated slot flags and a per-ring
    flag for rings with every slot eliminated.
    """
    offsets = ring_offsets.tolist()
    members = ring_members.tolist()
    refo = ref_offsets.tolist()
    refr = ref_rings.tolist()
    dec = decoy.astype(bool).tolist()
    ts = true_spend.astype(bool).tolist()
    n_rings = len(offsets) - 1
    ts_out = [0] * (len(refo) - 1)
    ts_ring = [0] * n_rings
    for r in range(n_rings):
        for s in range(offsets[r], offsets[r + 1]):
            if ts[s]:
                ts_out[members[s]] += 1
                ts_ring[r] += 1
    contra = [False] * n_rings
    rng = random.Random(shuffle_seed) if shuffle_seed is not None else None

    frontier = list(range(n_rings))
    while frontier:
        if rng is not None:
            rng.shuffle(frontier)
        promoted = []
        for r in frontier:
            live = 0
            last = -1
            for s in range(offsets[r], offsets[r + 1]):
                own = 1 if ts[s] else 0
                if dec[s] or ts_out[members[s]] - own > 0 or ts_ring[r] - own > 0:
                    continue
                live += 1
                last = s
            if live == 0:
                contra[r] = True
            elif live == 1 and not ts[last]:
                promoted.append((r, last))
        touched = set()
        for r, s in promoted:
            ts[s] = True
            y = members[s]
            ts_out[y] += 1
            ts_ring[r] += 1
            touched.add(r)
            touched.update(refr[refo[y]:refo[y + 1]])
        frontier = sorted(touched)
    return np.array(ts, dtype=bool), np.array(contra, dtype=bool)
