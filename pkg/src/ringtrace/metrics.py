"""Evaluation arithmetic: precision, collisions, agreement and time-bucketed reports."""
from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .chain import ChainStore
from .ingest import GroundTruth
from .labels import DECOY, TRUE_SPEND, HeuristicId, LabelSet

BUCKETS = ("day", "month", "year")
_BUCKET_FORMATS = {"day": "%Y-%m-%d", "month": "%Y-%m", "year": "%Y"}


def precision(tp: int, fp: int) -> Optional[float]:
    """``tp / (tp + fp)``, or ``None`` when nothing was labeled."""
    total = tp + fp
    return tp / total if total else None


def collision_ratio(conflicting: int, labeled: int) -> float:
    return conflicting / labeled if labeled else 0.0


@dataclass(frozen=True)
class PrecisionReport:
    heuristic: HeuristicId
    tp: int
    fp: int
    precision: Optional[float]
    true_spend_overlap: int
    true_spend_errors: int


def self_collision_rate(labels: LabelSet) -> tuple:
    """``(C, N, C/N)``.

    N counts labeled ring members. C counts TrueSpend labels that clash with
    another TrueSpend of the same set: the same output claimed spent in two
    or more rings, or two or more members claimed spent in one ring.
    """
    spent = {(l.ring_id, l.member) for l in labels if l.claim is TRUE_SPEND}
    rings_per_member = Counter(m for _, m in spent)
    members_per_ring = Counter(r for r, _ in spent)
    conflicting = sum(1 for r, m in spent if rings_per_member[m] > 1 or members_per_ring[r] > 1)
    labeled = len(labels.claims())
    return conflicting, labeled, collision_ratio(conflicting, labeled)


def precision_report(labels: LabelSet, truth: GroundTruth, chain: Optional[ChainStore] = None) -> PrecisionReport:
    """Score every label whose ring has a known true spend.

    ``chain`` is only used to check that the truth refers to real rings.
    """
    if chain is not None:
        truth.validate(chain)
    entries = truth.entries
    tp = fp = overlap = errors = 0
    for label in labels:
        spent = entries.get(label.ring_id)
        if spent is None:
            continue
        if label.claim is TRUE_SPEND:
            if label.member == spent:
                tp += 1
                overlap += 1
            else:
                fp += 1
                errors += 1
        elif label.member != spent:
            tp += 1
        else:
            fp += 1
    return PrecisionReport(labels.heuristic, tp, fp, precision(tp, fp), overlap, errors)


def labelset_as_truth(labels: Sequence[LabelSet]) -> GroundTruth:
    """Merge TrueSpend labels into a reference; rings claiming two spends are dropped and counted."""
    spends = defaultdict(set)
    for ls in labels:
        for label in ls:
            if label.claim is TRUE_SPEND:
                spends[label.ring_id].add(label.member)
    entries = {}
    conflicts = 0
    for ring_id in sorted(spends):
        members = spends[ring_id]
        if len(members) == 1:
            entries[ring_id] = next(iter(members))
        else:
            conflicts += 1
    return GroundTruth(entries, conflicts)


def _single_claims(labels: LabelSet) -> dict:
    return {k: next(iter(v)) for k, v in labels.claims().items() if len(v) == 1}


@dataclass(frozen=True)
class PairwiseCell:
    h1: str
    h2: str
    agreements: int
    collisions: int
    size1: int
    size2: int

    @property
    def defined(self) -> bool:
        return self.agreements + self.collisions > 0

    @property
    def collision_rate(self) -> Optional[float]:
        total = self.agreements + self.collisions
        return self.collisions / total if total else None

    @property
    def agreement_rate(self) -> Optional[float]:
        if not self.defined:
            return None
        return self.agreements / min(self.size1, self.size2)


def pairwise_matrix(label_sets: Sequence[LabelSet], names: Optional[Sequence[str]] = None) -> list:
    """Square matrix of :class:`PairwiseCell`; the diagonal is ``None``.

    Members with conflicting claims inside one set count toward its size but
    are left out of the comparison.
    """
    if len(label_sets) < 2:
        raise ValueError("pairwise comparison needs at least two label sets")
    names = list(names or [ls.heuristic.value for ls in label_sets])
    claims = [_single_claims(ls) for ls in label_sets]
    sizes = [len(ls.claims()) for ls in label_sets]
    n = len(label_sets)
    matrix = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = claims[i], claims[j]
            if len(a) > len(b):
                a, b = b, a
            agree = collide = 0
            for key, claim in a.items():
                other = b.get(key)
                if other is None:
                    continue
                if other is claim:
                    agree += 1
                else:
                    collide += 1
            matrix[i][j] = PairwiseCell(names[i], names[j], agree, collide, sizes[i], sizes[j])
            matrix[j][i] = PairwiseCell(names[j], names[i], agree, collide, sizes[j], sizes[i])
    return matrix


def bucket_key(ts: int, bucket: str = "month") -> str:
    try:
        fmt = _BUCKET_FORMATS[bucket]
    except KeyError:
        raise ValueError(f"bucket must be one of {', '.join(BUCKETS)}") from None
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(fmt)


def _ring_buckets(chain: ChainStore, bucket: str) -> list:
    tx_keys = [bucket_key(tx.timestamp, bucket) for tx in chain.transactions]
    return [tx_keys[t] for t in chain.ring_tx.tolist()]


def effective_ring_sizes(chain: ChainStore, combined: LabelSet) -> np.ndarray:
    """Per ring: 1 if a member is plainly TrueSpend, else size minus plainly-decoy members (floor 1)."""
    sizes = np.diff(chain.ring_offsets).astype(np.int64)
    eff = sizes.copy()
    decoys = defaultdict(int)
    resolved = set()
    for (ring_id, _), claims in combined.claims().items():
        if len(claims) != 1 or ring_id not in chain.ring_index:
            continue
        if TRUE_SPEND in claims:
            resolved.add(ring_id)
        else:
            decoys[ring_id] += 1
    for ring_id, d in decoys.items():
        r = chain.ring_index[ring_id]
        eff[r] = max(1, sizes[r] - d)
    for ring_id in resolved:
        eff[chain.ring_index[ring_id]] = 1
    return eff


@dataclass(frozen=True)
class RingSizeBucket:
    period: str
    mean_effective_ring_size: float
    mean_nominal_ring_size: float
    ring_count: int


@dataclass(frozen=True)
class RingSizeSeries:
    buckets: tuple

    def __iter__(self):
        return iter(self.buckets)

    def __len__(self) -> int:
        return len(self.buckets)


def effective_ring_size_series(chain: ChainStore, combined: LabelSet, bucket: str = "month") -> RingSizeSeries:
    eff = effective_ring_sizes(chain, combined)
    nominal = np.diff(chain.ring_offsets)
    keys = _ring_buckets(chain, bucket)
    acc = defaultdict(lambda: [0, 0, 0])
    for k, e, n in zip(keys, eff.tolist(), nominal.tolist()):
        row = acc[k]
        row[0] += e
        row[1] += n
        row[2] += 1
    return RingSizeSeries(tuple(
        RingSizeBucket(k, e / c, n / c, c) for k, (e, n, c) in sorted(acc.items())))


@dataclass(frozen=True)
class DecoyShareRow:
    period: str
    heuristic: str
    decoys: int
    ring_members: int
    share: float


def decoy_share_series(chain: ChainStore, label_sets: Sequence[LabelSet], bucket: str = "month",
                       names: Optional[Sequence[str]] = None) -> list:
    """Identified decoys per period and heuristic over all ring members of that period."""
    names = list(names or [ls.heuristic.value for ls in label_sets])
    keys = _ring_buckets(chain, bucket)
    members = defaultdict(int)
    for k, n in zip(keys, np.diff(chain.ring_offsets).tolist()):
        members[k] += n
    rows = []
    counts = []
    for ls in label_sets:
        c = defaultdict(int)
        for (ring_id, _), claims in ls.claims().items():
            r = chain.ring_index.get(ring_id)
            if r is not None and claims == {DECOY}:
                c[keys[r]] += 1
        counts.append(c)
    for k in sorted(members):
        for name, c in zip(names, counts):
            rows.append(DecoyShareRow(k, name, c[k], members[k], c[k] / members[k] if members[k] else 0.0))
    return rows


@dataclass(frozen=True)
class CoinbaseRow:
    period: str
    coinbase_outputs: int
    p2pool_outputs: Optional[int]
    p2pool_share: Optional[float]


def coinbase_output_series(chain: ChainStore, payouts=None, bucket: str = "month") -> list:
    owned = None if payouts is None else {int(p.output_global_index) for p in payouts}
    total = defaultdict(int)
    pool = defaultdict(int)
    for tx in chain.transactions:
        if not tx.is_coinbase:
            continue
        k = bucket_key(tx.timestamp, bucket)
        total[k] += len(tx.outputs)
        if owned is not None:
            pool[k] += sum(1 for o in tx.outputs if o.global_index in owned)
    rows = []
    for k in sorted(total):
        if owned is None:
            rows.append(CoinbaseRow(k, total[k], None, None))
        else:
            rows.append(CoinbaseRow(k, total[k], pool[k], pool[k] / total[k] if total[k] else 0.0))
    return rows


def fmt_rate(x: Optional[float], digits: int = 6) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def table_text(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()
