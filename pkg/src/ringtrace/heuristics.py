"""Labeling passes. Each takes a ``ChainStore`` (plus side data) and returns a ``LabelSet``."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .chain import ChainStore
from .errors import UnknownOutputIndex
from .labels import DECOY, TRUE_SPEND, HeuristicId, Label, LabelSet

log = logging.getLogger(__name__)

DEFAULT_WINDOW = (date(2018, 10, 11), date(2023, 4, 10))
P2POOL_LAUNCH = date(2021, 10, 1)
MORDINAL_MINT_TAG = "10"
MORDINAL_TRANSFER_TAG = "11"
UNLOCK_AGE = 10


def utc_date(ts: int) -> date:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).date()


def day_start(d) -> int:
    """UTC midnight of ``d`` as a unix timestamp. Integers pass through."""
    if isinstance(d, (int, np.integer)):
        return int(d)
    if isinstance(d, datetime):
        d = d.astimezone(timezone.utc).date() if d.tzinfo else d.date()
    if isinstance(d, str):
        d = date.fromisoformat(d)
    return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())


def _window_bounds(window) -> tuple:
    """Half-open ``[lo, hi)`` timestamp range; date ends are inclusive whole days."""
    start, end = window
    lo = day_start(start)
    if isinstance(end, (int, np.integer)):
        hi = int(end) + 1
    else:
        hi = day_start(end) + 86400
    if hi <= lo:
        raise ValueError(f"window {start}..{end} is empty or reversed")
    return lo, hi


def zero_mixin(chain: ChainStore) -> LabelSet:
    out = LabelSet(HeuristicId.ZERO_MIXIN)
    sizes = np.diff(chain.ring_offsets)
    for r in np.flatnonzero(sizes == 1).tolist():
        ring = chain.rings[r]
        out.add(Label(ring.ring_id, ring.members[0], TRUE_SPEND, HeuristicId.ZERO_MIXIN))
    return out


def ten_block_decoy_bug(chain: ChainStore, window=DEFAULT_WINDOW, age: int = UNLOCK_AGE) -> LabelSet:
    """Rings inside ``window`` with exactly one member aged ``age`` blocks: that member spent, the rest decoys."""
    h = HeuristicId.TEN_BLOCK
    out = LabelSet(h)
    if chain.n_rings == 0:
        return out
    lo, hi = _window_bounds(window)
    slots = kernels.unique_age_slots(chain.ring_offsets, chain.ring_members,
                                     chain.ring_height, chain.out_height, age)
    in_window = (chain.ring_time >= lo) & (chain.ring_time < hi)
    for r in np.flatnonzero(in_window & (slots >= 0)).tolist():
        ring = chain.rings[r]
        spent = int(chain.ring_members[slots[r]])
        for m in ring.members:
            out.add(Label(ring.ring_id, m, TRUE_SPEND if m == spent else DECOY, h))
    return out


def differ_by_one_pairs(chain: ChainStore) -> list:
    """Ring pairs of equal size sharing all but one member, each ring having exactly one partner.

    Returns ``(ring_a, member_a, ring_b, member_b)`` tuples of ring positions
    and the member unique to each side.
    """
    if chain.n_rings == 0:
        return []
    hashes = kernels.leave_one_out_hashes(chain.ring_offsets, chain.ring_members)
    sizes = np.diff(chain.ring_offsets)
    eligible = np.flatnonzero(sizes[chain.slot_ring] >= 2)
    hashes = hashes[eligible]
    order = np.argsort(hashes, kind="stable")
    sorted_h = hashes[order]
    if len(sorted_h) < 2:
        return []
    same = sorted_h[1:] == sorted_h[:-1]
    starts = np.flatnonzero(np.concatenate(([True], ~same)))
    ends = np.concatenate((starts[1:], [len(sorted_h)]))

    partners = defaultdict(set)
    candidates = []
    members = chain.ring_members
    for a, b in zip(starts.tolist(), ends.tolist()):
        if b - a < 2:
            continue
        exact = defaultdict(list)
        for slot in eligible[order[a:b]].tolist():
            r = int(chain.slot_ring[slot])
            dropped = int(members[slot])
            rest = chain.members_of(r)
            exact[tuple(sorted(int(m) for m in rest if m != dropped))].append((r, dropped))
        for group in exact.values():
            for i in range(len(group)):
                ri, di = group[i]
                for j in range(i + 1, len(group)):
                    rj, dj = group[j]
                    if ri == rj or di == dj:
                        continue
                    partners[ri].add(rj)
                    partners[rj].add(ri)
                    candidates.append((ri, di, rj, dj))
    pairs = [c for c in candidates if len(partners[c[0]]) == 1 and len(partners[c[2]]) == 1]
    pairs.sort()
    return pairs


def differ_by_one(chain: ChainStore) -> LabelSet:
    h = HeuristicId.DIFFER_BY_ONE
    out = LabelSet(h)
    for ra, ma, rb, mb in differ_by_one_pairs(chain):
        for r, unique in ((ra, ma), (rb, mb)):
            ring = chain.rings[r]
            for m in ring.members:
                out.add(Label(ring.ring_id, m, TRUE_SPEND if m == unique else DECOY, h))
    return out


def mordinal_transactions(chain: ChainStore) -> set:
    tags = {MORDINAL_MINT_TAG, MORDINAL_TRANSFER_TAG}
    return {tx.tx_id for tx in chain.transactions if tags.intersection(tx.extra_tags)}


def mordinal_decoys(chain: ChainStore, burn_keys: Optional[Iterable[str]] = None) -> LabelSet:
    """Outside Mordinal transactions, first outputs of Mordinal transactions and burn-key outputs are decoys."""
    h = HeuristicId.MORDINAL
    out = LabelSet(h)
    mt = mordinal_transactions(chain)
    mt_pos = np.zeros(len(chain.transactions), dtype=bool)
    for tx_id in mt:
        mt_pos[chain.tx_index[tx_id]] = True
    if burn_keys is None:
        burned = chain.out_burned
    else:
        keys = frozenset(burn_keys)
        burned = np.fromiter((o.pk in keys for o in chain.outputs), bool, chain.n_outputs)
    flagged = burned | (mt_pos[chain.out_tx] & (chain.out_position == 0))
    slot_hit = flagged[chain.ring_members] & ~mt_pos[chain.ring_tx[chain.slot_ring]]
    for slot in np.flatnonzero(slot_hit).tolist():
        ring = chain.rings[chain.slot_ring[slot]]
        out.add(Label(ring.ring_id, int(chain.ring_members[slot]), DECOY, h))
    return out


def coinbase_decoys(chain: ChainStore, max_inputs: int = 90, since=P2POOL_LAUNCH) -> LabelSet:
    """Coinbase outputs referenced by transactions with few inputs are decoys.

    ``since=None`` disables the date gate.
    """
    if max_inputs < 1:
        raise ValueError("max_inputs must be >= 1")
    h = HeuristicId.COINBASE
    out = LabelSet(h)
    if chain.n_rings == 0:
        return out
    tx_ok = chain.tx_input_count <= max_inputs
    if since is not None:
        tx_ok &= chain.tx_time >= day_start(since)
    slot_hit = chain.out_coinbase[chain.ring_members] & tx_ok[chain.ring_tx[chain.slot_ring]]
    for slot in np.flatnonzero(slot_hit).tolist():
        ring = chain.rings[chain.slot_ring[slot]]
        out.add(Label(ring.ring_id, int(chain.ring_members[slot]), DECOY, h))
    return out


@dataclass(frozen=True)
class SweepRow:
    threshold: int
    decoys_marked: int
    tp: int
    fp: int


def coinbase_threshold_sweep(chain: ChainStore, truth, thresholds: Sequence[int], since=None) -> list:
    """Coinbase heuristic counts per max-inputs threshold.

    ``truth`` is a ``GroundTruth`` or one or more reference ``LabelSet`` objects
    (merged with :func:`ringtrace.metrics.labelset_as_truth`).
    """
    from .metrics import labelset_as_truth, precision_report

    if isinstance(truth, LabelSet):
        truth = labelset_as_truth([truth])
    elif isinstance(truth, (list, tuple)):
        truth = labelset_as_truth(list(truth))
    rows = []
    for t in thresholds:
        labels = coinbase_decoys(chain, max_inputs=int(t), since=since)
        rep = precision_report(labels, truth, chain)
        rows.append(SweepRow(int(t), len(labels), rep.tp, rep.fp))
    return rows


def group_payouts(payouts) -> dict:
    """``miner_id -> set of global indices``."""
    owned = defaultdict(set)
    for p in payouts:
        owned[p.miner_id].add(int(p.output_global_index))
    return dict(owned)


def p2pool_output_merging(chain: ChainStore, payouts) -> LabelSet:
    """Consolidation transactions whose every ring references a known payout of one miner."""
    h = HeuristicId.P2POOL
    out = LabelSet(h)
    for miner, owned in sorted(group_payouts(payouts).items()):
        for g in owned:
            if not 0 <= g < chain.n_outputs:
                raise UnknownOutputIndex(g)
        touched = set()
        for g in owned:
            lo, hi = chain.ref_offsets[g], chain.ref_offsets[g + 1]
            touched.update(chain.ring_tx[chain.ref_rings[lo:hi]].tolist())
        owned_by_tx = {}
        for t in touched:
            tx = chain.transactions[t]
            hits = [owned.intersection(ring.members) for ring in tx.inputs]
            if all(hits):
                owned_by_tx[t] = set().union(*hits)
        best = {}
        for t, refs in owned_by_tx.items():
            tx = chain.transactions[t]
            rank = (-len(refs), tx.block_height, tx.tx_id)
            for o in refs:
                if o not in best or rank < best[o][0]:
                    best[o] = (rank, t)
        for t in sorted({t for _, t in best.values()}):
            for ring in chain.transactions[t].inputs:
                for m in ring.members:
                    out.add(Label(ring.ring_id, m, TRUE_SPEND if m in owned else DECOY, h))
    return out


def propagate_consequences(labels: LabelSet, chain: ChainStore) -> LabelSet:
    """Close a label set under the one-spend rule.

    Each TrueSpend(m in R) makes m a decoy in every other ring referencing it,
    and every other member of R a decoy in R. New labels are marked derived
    and keep the heuristic of the label that implied them.
    """
    out = labels.copy()
    for label in labels.true_spends():
        g = label.member
        r_self = chain.ring_pos(label.ring_id)
        lo, hi = chain.ref_offsets[g], chain.ref_offsets[g + 1]
        for r in chain.ref_rings[lo:hi].tolist():
            if r != r_self:
                out.add(Label(chain.rings[r].ring_id, g, DECOY, label.heuristic, True))
        for m in chain.rings[r_self].members:
            if m != g:
                out.add(Label(label.ring_id, m, DECOY, label.heuristic, True))
    return out

