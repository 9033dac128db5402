import numpy as np
import pytest

from conftest import issuance, pk, spend
from ringtrace.chain import BURN_KEYS, build_chain, make_tx, member_age
from ringtrace.errors import (
    DanglingReference,
    DuplicateGlobalIndex,
    InvalidChain,
    MemberNotInRing,
    NonMonotonicHeight,
    UnknownOutputIndex,
    UnknownRing,
)


def test_referencing_rings_small():
    chain = build_chain([issuance("a", 0, 0, 2), spend("b", 1, [[0, 1]], 2)])
    assert chain.n_outputs == 3
    assert chain.referencing_rings(0) == [("b", 0)]
    assert chain.referencing_rings(1) == [("b", 0)]
    assert chain.referencing_rings(2) == []


def test_empty_store_lookups_fail_cleanly():
    chain = build_chain([])
    assert chain.n_outputs == 0 and chain.n_rings == 0
    with pytest.raises(UnknownOutputIndex):
        chain.output(0)
    with pytest.raises(UnknownRing):
        chain.ring(("x", 0))
    with pytest.raises(KeyError):
        chain.referencing_rings(0)
    assert chain.transactions_at(0) == ()


def test_member_age_examples():
    txs = [issuance("a", 100, 0, 1), issuance("b", 105, 1, 1), spend("c", 106, [[1]], 2),
           spend("d", 110, [[0, 1]], 3)]
    chain = build_chain(txs)
    assert member_age(chain.ring(("d", 0)), 0, chain) == 10
    assert member_age(chain.ring(("c", 0)), 1, chain) == 1
    with pytest.raises(MemberNotInRing):
        member_age(chain.ring(("c", 0)), 0, chain)


def test_dangling_reference():
    with pytest.raises(DanglingReference) as e:
        build_chain([issuance("a", 0, 0, 2), spend("b", 1, [[0, 7]], 2)])
    assert e.value.member == 7


def test_non_monotonic_height():
    with pytest.raises(NonMonotonicHeight):
        build_chain([issuance("a", 5, 0, 1, ts=10), issuance("b", 4, 1, 1, ts=20)])


def test_duplicate_global_index():
    with pytest.raises(DuplicateGlobalIndex):
        build_chain([issuance("a", 0, 0, 2), issuance("b", 1, 1, 1)])


@pytest.mark.parametrize("txs", [
    # gap in indices
    [issuance("a", 0, 0, 1), issuance("b", 1, 2, 1)],
    # coinbase with inputs
    [issuance("a", 0, 0, 1), make_tx("b", 1, 1, coinbase=True, inputs=[[0]], outputs=[(1, pk(1))])],
    # member created in the spending block
    [issuance("a", 3, 0, 1), spend("b", 3, [[0]], 1)],
    # repeated member
    [issuance("a", 0, 0, 2), spend("b", 1, [[0, 0]], 2)],
    # duplicate tx id
    [issuance("a", 0, 0, 1), issuance("a", 1, 1, 1)],
    # decreasing timestamp
    [issuance("a", 0, 0, 1, ts=50), issuance("b", 1, 1, 1, ts=40)],
])
def test_invalid_chains(txs):
    with pytest.raises(InvalidChain):
        build_chain(txs)


def test_burn_flag():
    tx = make_tx("a", 0, 0, outputs=[(0, BURN_KEYS[0]), (1, BURN_KEYS[1]), (2, pk(9))])
    chain = build_chain([tx])
    assert chain.out_burned.tolist() == [True, True, False]


def test_arrays_are_read_only(fig1_chain):
    with pytest.raises(ValueError):
        fig1_chain.ring_members[0] = 3


def test_reference_index_is_bijective(mixed_ledger):
    chain = mixed_ledger.chain
    assert chain.n_rings > 1000
    forward = {(ring.ring_id, g) for ring in chain.rings for g in ring.members}
    backward = {(rid, g) for g in range(chain.n_outputs) for rid in chain.referencing_rings(g)}
    assert forward == backward


def test_ages_match_raw_records(mixed_ledger):
    chain = mixed_ledger.chain
    heights = {o.global_index: o.creation_height for tx in mixed_ledger.transactions for o in tx.outputs}
    expected = [tx.block_height - heights[m] for tx in mixed_ledger.transactions
                for ring in tx.inputs for m in ring.members]
    assert chain.slot_ages().tolist() == expected
    assert chain.slot_ages().min() >= mixed_ledger.config.lock_blocks
    ring = chain.rings[17]
    assert member_age(ring, ring.members[0], chain) == expected[chain.ring_offsets[17]]


def test_build_is_deterministic(mixed_ledger):
    a = build_chain(mixed_ledger.transactions)
    b = build_chain(mixed_ledger.transactions)
    for name in ("ring_offsets", "ring_members", "ref_offsets", "ref_rings", "out_height"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.rings == b.rings
