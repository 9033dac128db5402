"""In-memory ledger model.

Outputs are identified by their dense global index; rings reference outputs
by absolute index. ``ChainStore`` keeps both the record objects and flat
numpy views (CSR layout) that the heuristics and kernels scan.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DanglingReference,
    DuplicateGlobalIndex,
    InvalidChain,
    MemberNotInRing,
    NonMonotonicHeight,
    UnknownOutputIndex,
    UnknownRing,
)

ZERO_BURN_KEY = "0" * 64
DEADBEEF_BURN_KEY = "deadbeef" * 7 + "dead000f"
BURN_KEYS = (ZERO_BURN_KEY, DEADBEEF_BURN_KEY)

RingId = tuple  # (tx_id, input_position)


@dataclass(frozen=True)
class OutputRecord:
    global_index: int
    pk: str
    creating_tx: str
    position_in_tx: int
    creation_height: int
    is_coinbase: bool = False
    burned_key: bool = False


@dataclass(frozen=True)
class InputRing:
    ring_id: RingId
    members: tuple

    @property
    def ring_size(self) -> int:
        return len(self.members)

    @property
    def tx_id(self) -> str:
        return self.ring_id[0]

    @property
    def position(self) -> int:
        return self.ring_id[1]


@dataclass(frozen=True)
class TransactionRecord:
    tx_id: str
    block_height: int
    timestamp: int
    is_coinbase: bool = False
    extra_tags: tuple = ()
    inputs: tuple = ()
    outputs: tuple = ()

    @property
    def input_count(self) -> int:
        return len(self.inputs)


def make_tx(tx_id, height, timestamp, *, coinbase=False, extra_tags=(), inputs=(),
            outputs=(), burn_keys=BURN_KEYS) -> TransactionRecord:
    """Build a ``TransactionRecord`` from plain values.

    ``inputs`` is a sequence of member lists (absolute global indices) and
    ``outputs`` a sequence of ``(global_index, pk)`` pairs.
    """
    burn = frozenset(burn_keys)
    rings = tuple(
        InputRing((tx_id, pos), tuple(int(m) for m in members))
        for pos, members in enumerate(inputs)
    )
    outs = tuple(
        OutputRecord(
            global_index=int(g),
            pk=pk,
            creating_tx=tx_id,
            position_in_tx=pos,
            creation_height=int(height),
            is_coinbase=bool(coinbase),
            burned_key=pk in burn,
        )
        for pos, (g, pk) in enumerate(outputs)
    )
    return TransactionRecord(tx_id, int(height), int(timestamp), bool(coinbase),
                             tuple(str(t) for t in extra_tags), rings, outs)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChainStore:
    """Immutable indexed view over a ledger. Build it with :func:`build_chain`."""

    transactions: tuple
    outputs: tuple
    rings: tuple
    ring_index: dict
    tx_index: dict
    burn_keys: tuple
    # ring-major CSR: members of ring r are ring_members[ring_offsets[r]:ring_offsets[r+1]]
    ring_offsets: np.ndarray
    ring_members: np.ndarray
    ring_tx: np.ndarray
    ring_height: np.ndarray
    ring_time: np.ndarray
    slot_ring: np.ndarray
    # output-major CSR: rings referencing output g
    ref_offsets: np.ndarray
    ref_rings: np.ndarray
    out_height: np.ndarray
    out_tx: np.ndarray
    out_position: np.ndarray
    out_coinbase: np.ndarray
    out_burned: np.ndarray
    tx_height: np.ndarray
    tx_time: np.ndarray
    tx_input_count: np.ndarray
    tx_coinbase: np.ndarray
    _height_spans: dict = field(repr=False)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    @property
    def n_rings(self) -> int:
        return len(self.rings)

    def output(self, g: int) -> OutputRecord:
        if not 0 <= g < len(self.outputs):
            raise UnknownOutputIndex(g)
        return self.outputs[g]

    def ring(self, ring_id) -> InputRing:
        try:
            return self.rings[self.ring_index[tuple(ring_id)]]
        except KeyError:
            raise UnknownRing(ring_id) from None

    def ring_pos(self, ring_id) -> int:
        try:
            return self.ring_index[tuple(ring_id)]
        except KeyError:
            raise UnknownRing(ring_id) from None

    def tx(self, tx_id: str) -> TransactionRecord:
        return self.transactions[self.tx_index[tx_id]]

    def referencing_rings(self, g: int) -> list:
        if not 0 <= g < len(self.outputs):
            raise UnknownOutputIndex(g)
        lo, hi = self.ref_offsets[g], self.ref_offsets[g + 1]
        return [self.rings[r].ring_id for r in self.ref_rings[lo:hi]]

    def members_of(self, r: int) -> np.ndarray:
        return self.ring_members[self.ring_offsets[r]:self.ring_offsets[r + 1]]

    def spend_height(self, ring_id) -> int:
        return int(self.ring_height[self.ring_pos(ring_id)])

    def transactions_at(self, height: int) -> tuple:
        lo, hi = self._height_spans.get(height, (0, 0))
        return self.transactions[lo:hi]

    def slot_ages(self) -> np.ndarray:
        """Age in blocks of every ring slot, aligned with ``ring_members``."""
        return self.ring_height[self.slot_ring] - self.out_height[self.ring_members]


def member_age(ring: InputRing, member: int, chain: ChainStore) -> int:
    if member not in ring.members:
        raise MemberNotInRing(ring.ring_id, member)
    return chain.spend_height(ring.ring_id) - chain.output(member).creation_height


def build_chain(transactions: Iterable[TransactionRecord], burn_keys: Sequence[str] = BURN_KEYS) -> ChainStore:
    txs = tuple(transactions)
    outputs: list = []
    tx_index: dict = {}
    spans: dict = {}
    prev_height = prev_time = None
    for pos, tx in enumerate(txs):
        if prev_height is not None and tx.block_height < prev_height:
            raise NonMonotonicHeight(pos, tx.block_height, prev_height)
        if prev_time is not None and tx.timestamp < prev_time:
            raise InvalidChain(f"transaction #{pos}: timestamp {tx.timestamp} decreases")
        if tx.tx_id in tx_index:
            raise InvalidChain(f"duplicate transaction id {tx.tx_id}")
        if tx.is_coinbase and tx.inputs:
            raise InvalidChain(f"coinbase transaction {tx.tx_id} has inputs")
        tx_index[tx.tx_id] = pos
        lo, _ = spans.get(tx.block_height, (pos, pos))
        spans[tx.block_height] = (lo, pos + 1)
        prev_height, prev_time = tx.block_height, tx.timestamp
        for out in tx.outputs:
            g = out.global_index
            if g < len(outputs):
                raise DuplicateGlobalIndex(g)
            if g != len(outputs):
                raise InvalidChain(f"output index {g} leaves a gap (expected {len(outputs)})")
            if out.creating_tx != tx.tx_id or out.creation_height != tx.block_height:
                raise InvalidChain(f"output {g} disagrees with its transaction {tx.tx_id}")
            outputs.append(out)

    n_out = len(outputs)
    out_height = np.fromiter((o.creation_height for o in outputs), np.int64, n_out)
    out_tx = np.fromiter((tx_index[o.creating_tx] for o in outputs), np.int64, n_out)
    out_position = np.fromiter((o.position_in_tx for o in outputs), np.int64, n_out)
    out_coinbase = np.fromiter((o.is_coinbase for o in outputs), bool, n_out)
    out_burned = np.fromiter((o.burned_key for o in outputs), bool, n_out)

    rings = []
    ring_tx = []
    sizes = []
    flat: list = []
    for pos, tx in enumerate(txs):
        for ring in tx.inputs:
            if not ring.members:
                raise InvalidChain(f"ring {ring.ring_id} is empty")
            if len(set(ring.members)) != len(ring.members):
                raise InvalidChain(f"ring {ring.ring_id} repeats a member")
            for m in ring.members:
                if not 0 <= m < n_out:
                    raise DanglingReference(ring.ring_id, m)
                if outputs[m].creation_height >= tx.block_height:
                    raise InvalidChain(
                        f"ring {ring.ring_id} references output {m} created at height "
                        f"{outputs[m].creation_height}, not before {tx.block_height}")
            rings.append(ring)
            ring_tx.append(pos)
            sizes.append(len(ring.members))
            flat.extend(ring.members)

    n_rings = len(rings)
    tx_height = np.fromiter((t.block_height for t in txs), np.int64, len(txs))
    tx_time = np.fromiter((t.timestamp for t in txs), np.int64, len(txs))
    ring_tx_a = np.asarray(ring_tx, dtype=np.int64)
    ring_offsets = np.zeros(n_rings + 1, dtype=np.int64)
    np.cumsum(np.asarray(sizes, dtype=np.int64), out=ring_offsets[1:])
    ring_members = np.asarray(flat, dtype=np.int64)
    slot_ring = np.repeat(np.arange(n_rings, dtype=np.int64), sizes) if n_rings else np.zeros(0, np.int64)

    order = np.argsort(ring_members, kind="stable")
    ref_rings = slot_ring[order]
    ref_offsets = np.zeros(n_out + 1, dtype=np.int64)
    np.cumsum(np.bincount(ring_members, minlength=n_out), out=ref_offsets[1:])

    return ChainStore(
        transactions=txs,
        outputs=tuple(outputs),
        rings=tuple(rings),
        ring_index={ring.ring_id: i for i, ring in enumerate(rings)},
        tx_index=tx_index,
        burn_keys=tuple(burn_keys),
        ring_offsets=_frozen(ring_offsets),
        ring_members=_frozen(ring_members),
        ring_tx=_frozen(ring_tx_a),
        ring_height=_frozen(tx_height[ring_tx_a] if n_rings else np.zeros(0, np.int64)),
        ring_time=_frozen(tx_time[ring_tx_a] if n_rings else np.zeros(0, np.int64)),
        slot_ring=_frozen(slot_ring),
        ref_offsets=_frozen(ref_offsets),
        ref_rings=_frozen(np.ascontiguousarray(ref_rings, dtype=np.int64)),
        out_height=_frozen(out_height),
        out_tx=_frozen(out_tx),
        out_position=_frozen(out_position),
        out_coinbase=_frozen(out_coinbase),
        out_burned=_frozen(out_burned),
        tx_height=_frozen(tx_height),
        tx_time=_frozen(tx_time),
        tx_input_count=_frozen(np.fromiter((len(t.inputs) for t in txs), np.int64, len(txs))),
        tx_coinbase=_frozen(np.fromiter((t.is_coinbase for t in txs), bool, len(txs))),
        _height_spans=spans,
    )
