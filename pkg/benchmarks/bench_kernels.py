"""Time the compiled kernels against the pure-Python fallback on a synthetic chain.

    python3 benchmarks/bench_kernels.py --blocks 2000 --repeat 3
"""
import argparse
import time

import numpy as np

from ringtrace import _fallback
from ringtrace.heuristics import zero_mixin
from ringtrace.reaction import slot_flags
from ringtrace.synth import GeneratorConfig, TxRate, generate

try:
    from ringtrace import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--blocks", type=int, default=2000)
    ap.add_argument("--txs", type=float, default=8.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ledger = generate(GeneratorConfig(seed=args.seed, blocks=args.blocks, zero_mixin_rate=0.05,
                                      txs_per_block=TxRate("poisson", args.txs)))
    c = ledger.chain
    decoy, spent = slot_flags(zero_mixin(c), c)
    cases = {
        "leave_one_out_hashes": lambda m: m.leave_one_out_hashes(c.ring_offsets, c.ring_members),
        "unique_age_slots": lambda m: m.unique_age_slots(c.ring_offsets, c.ring_members,
                                                         c.ring_height, c.out_height, 10),
        "reaction_fixpoint": lambda m: m.reaction_fixpoint(c.ring_offsets, c.ring_members, c.ref_offsets,
                                                           c.ref_rings, decoy, spent),
    }
    print(f"chain: {c.n_rings} rings, {len(c.ring_members)} slots, {c.n_outputs} outputs")
    print(f"{'kernel':<24}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, fn in cases.items():
        py = best_of(lambda: fn(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:<24}{py:>12.4f}{'n/a':>12}{'':>10}")
            continue
        a, b = fn(_fallback), fn(_kernels)
        same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) else np.array_equal(a, b)
        assert same, f"{name}: backends disagree"
        cy = best_of(lambda: fn(_kernels), args.repeat)
        print(f"{name:<24}{py:>12.4f}{cy:>12.4f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
