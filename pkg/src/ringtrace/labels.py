"""Label data model shared by every heuristic pass and every metric."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from enum import Enum
from typing import Iterable, NamedTuple

from .errors import MalformedLine, MemberNotInRing


class Claim(str, Enum):
    TRUE_SPEND = "TrueSpend"
    DECOY = "Decoy"

    def __str__(self) -> str:
        return self.value


class HeuristicId(str, Enum):
    ZERO_MIXIN = "ZeroMixin"
    CHAIN_REACTION = "ChainReaction"
    TEN_BLOCK = "TenBlockDecoyBug"
    DIFFER_BY_ONE = "DifferByOne"
    MORDINAL = "Mordinal"
    COINBASE = "Coinbase"
    P2POOL = "P2PoolMerge"
    COMBINED = "Combined"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "HeuristicId":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(h.value for h in cls)
            raise ValueError(f"unknown heuristic {name!r}; valid names: {valid}") from None


TRUE_SPEND = Claim.TRUE_SPEND
DECOY = Claim.DECOY


class Label(NamedTuple):
    ring_id: tuple
    member: int
    claim: Claim
    heuristic: HeuristicId
    derived: bool = False


LABEL_COLUMNS = ("tx_id", "input_position", "member_global_index", "claim", "heuristic", "derived")


class LabelSet:
    """Collection of ring-member assertions keyed by ``(ring_id, member, heuristic)``.

    When two labels share a key, a direct label replaces a derived one and a
    TrueSpend replaces a Decoy; otherwise the first one stays. Claim conflicts
    across keys (same member in two rings, two spends in one ring) are kept
    and show up in :func:`ringtrace.metrics.self_collision_rate`.
    """

    def __init__(self, heuristic=HeuristicId.COMBINED, labels: Iterable[Label] = (), chain=None):
        self.heuristic = HeuristicId(heuristic)
        self._labels: dict = {}
        self.contradictions: tuple = ()
        self._chain = chain
        self._cache: dict = {}
        for label in labels:
            self.add(label)

    def add(self, label: Label) -> bool:
        if self._chain is not None and label.member not in self._chain.ring(label.ring_id).members:
            raise MemberNotInRing(label.ring_id, label.member)
        key = (label.ring_id, label.member, label.heuristic)
        old = self._labels.get(key)
        if old is not None:
            if old == label or not _outranks(label, old):
                return False
        self._labels[key] = label
        self._cache.clear()
        return True

    def mark(self, ring_id, member, claim, heuristic=None, derived=False) -> bool:
        return self.add(Label(tuple(ring_id), int(member), Claim(claim),
                              HeuristicId(heuristic or self.heuristic), bool(derived)))

    def update(self, labels: Iterable[Label]) -> None:
        for label in labels:
            self.add(label)

    def __iter__(self):
        return iter(self._labels.values())

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label) -> bool:
        key = (label.ring_id, label.member, label.heuristic)
        return self._labels.get(key) == label

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelSet):
            return NotImplemented
        return self._labels == other._labels

    def __repr__(self) -> str:
        return f"LabelSet({self.heuristic.value}, {len(self)} labels)"

    def copy(self, heuristic=None) -> "LabelSet":
        out = LabelSet(heuristic or self.heuristic)
        out._labels = dict(self._labels)
        out.contradictions = self.contradictions
        return out

    def sorted(self) -> list:
        return sorted(self._labels.values(),
                      key=lambda l: (l.ring_id, l.member, l.heuristic.value, l.claim.value))

    def claims(self) -> dict:
        """``(ring_id, member) -> frozenset of claims`` over all heuristics."""
        if "claims" not in self._cache:
            acc = defaultdict(set)
            for label in self._labels.values():
                acc[(label.ring_id, label.member)].add(label.claim)
            self._cache["claims"] = {k: frozenset(v) for k, v in acc.items()}
        return self._cache["claims"]

    def by_ring(self) -> dict:
        if "ring" not in self._cache:
            acc = defaultdict(list)
            for label in self._labels.values():
                acc[label.ring_id].append(label)
            self._cache["ring"] = dict(acc)
        return self._cache["ring"]

    def by_member(self) -> dict:
        if "member" not in self._cache:
            acc = defaultdict(list)
            for label in self._labels.values():
                acc[label.member].append(label)
            self._cache["member"] = dict(acc)
        return self._cache["member"]

    def true_spends(self) -> list:
        return [l for l in self._labels.values() if l.claim is TRUE_SPEND]

    def decoys(self) -> list:
        return [l for l in self._labels.values() if l.claim is DECOY]

    def counts(self) -> dict:
        ts = sum(1 for l in self._labels.values() if l.claim is TRUE_SPEND)
        derived = sum(1 for l in self._labels.values() if l.derived)
        return {"labels": len(self), "true_spend": ts, "decoy": len(self) - ts, "derived": derived}


def _outranks(new: Label, old: Label) -> bool:
    if new.derived != old.derived:
        return not new.derived
    return new.claim is TRUE_SPEND and old.claim is DECOY


def union(label_sets: Iterable[LabelSet], heuristic=HeuristicId.COMBINED) -> LabelSet:
    out = LabelSet(heuristic)
    for ls in label_sets:
        out.update(ls)
    return out


def write_labels(labels: LabelSet, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(LABEL_COLUMNS)
    for l in labels.sorted():
        w.writerow((l.ring_id[0], l.ring_id[1], l.member, l.claim.value, l.heuristic.value,
                    int(l.derived)))


def labels_to_text(labels: LabelSet) -> str:
    buf = io.StringIO()
    write_labels(labels, buf)
    return buf.getvalue()


def read_labels(stream, path=None) -> LabelSet:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != LABEL_COLUMNS:
        raise MalformedLine(1, f"expected header {','.join(LABEL_COLUMNS)}", path)
    labels = []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(LABEL_COLUMNS):
            raise MalformedLine(line_no, f"expected {len(LABEL_COLUMNS)} columns, got {len(row)}", path)
        tx_id, pos, member, claim, heuristic, derived = row
        try:
            labels.append(Label((tx_id, int(pos)), int(member), Claim(claim),
                                HeuristicId(heuristic), _parse_flag(derived)))
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc), path) from None
    kinds = {l.heuristic for l in labels}
    heuristic = kinds.pop() if len(kinds) == 1 else HeuristicId.COMBINED
    return LabelSet(heuristic, labels)


def _parse_flag(text: str) -> bool:
    if text in ("0", "false", "False"):
        return False
    if text in ("1", "true", "True"):
        return True
    raise ValueError(f"bad derived flag {text!r}")
