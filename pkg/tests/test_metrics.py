from collections import defaultdict
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import pk, ring_chain
from ringtrace.chain import build_chain, make_tx
from ringtrace.heuristics import differ_by_one, propagate_consequences, ten_block_decoy_bug, zero_mixin
from ringtrace.ingest import GroundTruth, PayoutRecord
from ringtrace.labels import DECOY, TRUE_SPEND, HeuristicId, Label, LabelSet, union
from ringtrace.metrics import (
    bucket_key,
    coinbase_output_series,
    decoy_share_series,
    effective_ring_size_series,
    effective_ring_sizes,
    labelset_as_truth,
    pairwise_matrix,
    precision,
    precision_report,
    self_collision_rate,
)
from ringtrace.reaction import chain_reaction

H = HeuristicId


def test_precision_formula():
    assert precision(3, 1) == 0.75
    assert precision(0, 0) is None
    assert precision(0, 5) == 0.0


def test_scr_single_true_spend():
    ls = LabelSet(H.TEN_BLOCK, [Label(("a", 0), 1, TRUE_SPEND, H.TEN_BLOCK)])
    assert self_collision_rate(ls) == (0, 1, 0.0)
    assert self_collision_rate(LabelSet()) == (0, 0, 0.0)


def test_scr_member_spent_twice_enumerated():
    # output 0 claimed spent in two rings of 16; all members labeled
    ls = LabelSet(H.TEN_BLOCK)
    for t in ("a", "b"):
        members = [0] + [100 * (t == "b") + k for k in range(1, 16)]
        for m in members:
            ls.mark((t, 0), m, TRUE_SPEND if m == 0 else DECOY)
    ls.mark(("c", 0), 5, TRUE_SPEND)
    ls.mark(("c", 0), 6, TRUE_SPEND)
    c, n, scr = self_collision_rate(ls)
    assert (c, n) == (4, 34)
    assert scr == 4 / 34


def test_precision_report_rules(fig1_chain):
    truth = GroundTruth({("r3", 0): 7})
    ls = LabelSet(H.COMBINED, [
        Label(("r3", 0), 7, TRUE_SPEND, H.TEN_BLOCK),   # tp
        Label(("r3", 0), 6, DECOY, H.TEN_BLOCK),        # tp
        Label(("r3", 0), 8, TRUE_SPEND, H.COINBASE),    # fp
        Label(("r3", 0), 7, DECOY, H.COINBASE),         # fp
        Label(("r4", 0), 9, TRUE_SPEND, H.TEN_BLOCK),   # ignored, no truth
    ])
    rep = precision_report(ls, truth, fig1_chain)
    assert (rep.tp, rep.fp, rep.precision) == (2, 2, 0.5)
    assert (rep.true_spend_overlap, rep.true_spend_errors) == (1, 1)
    empty = precision_report(ls, GroundTruth({("zz", 0): 1}))
    assert empty.precision is None and empty.tp == empty.fp == 0


def test_labelset_as_truth():
    a = LabelSet(H.ZERO_MIXIN, [Label(("a", 0), 1, TRUE_SPEND, H.ZERO_MIXIN),
                                Label(("b", 0), 2, TRUE_SPEND, H.ZERO_MIXIN),
                                Label(("b", 0), 3, DECOY, H.ZERO_MIXIN)])
    t = labelset_as_truth([a])
    assert t.entries == {("a", 0): 1, ("b", 0): 2} and t.excluded_conflicts == 0
    b = LabelSet(H.TEN_BLOCK, [Label(("b", 0), 3, TRUE_SPEND, H.TEN_BLOCK)])
    t = labelset_as_truth([a, b])
    assert t.entries == {("a", 0): 1} and t.excluded_conflicts == 1


def test_reaction_reference_equals_generator_truth(mixed_ledger):
    chain = mixed_ledger.chain
    ref = labelset_as_truth([chain_reaction(chain, zero_mixin(chain))])
    assert len(ref) > 0
    assert ref.entries == {r: g for r, g in mixed_ledger.truth.entries.items() if r in ref.entries}


def _sets():
    r = ("t", 0)
    a = LabelSet(H.TEN_BLOCK, [Label(r, m, DECOY, H.TEN_BLOCK) for m in range(10)]
                 + [Label(r, 10, TRUE_SPEND, H.TEN_BLOCK)])
    b = LabelSet(H.COINBASE, [Label(r, m, DECOY, H.COINBASE) for m in range(11)]
                 + [Label(("u", 0), m, DECOY, H.COINBASE) for m in range(20)])
    return a, b


def test_pairwise_constructed_overlap():
    a, b = _sets()
    m = pairwise_matrix([a, b])
    cell = m[0][1]
    assert (cell.agreements, cell.collisions) == (10, 1)
    assert cell.collision_rate == 1 / 11
    assert cell.agreement_rate == 10 / min(11, 31)
    assert m[0][0] is None and m[1][1] is None
    assert (m[1][0].agreements, m[1][0].collisions) == (10, 1)


def test_pairwise_identical_disjoint_and_contained():
    a, b = _sets()
    cell = pairwise_matrix([a, a.copy()])[0][1]
    assert cell.collision_rate == 0 and cell.agreement_rate == 1
    c = LabelSet(H.MORDINAL, [Label(("z", 0), 1, DECOY, H.MORDINAL)])
    cell = pairwise_matrix([a, c])[0][1]
    assert not cell.defined and cell.collision_rate is None and cell.agreement_rate is None
    sub = LabelSet(H.MORDINAL, [Label(("t", 0), m, DECOY, H.MORDINAL) for m in range(3)])
    cell = pairwise_matrix([b, sub])[0][1]
    assert cell.agreement_rate == 1 and cell.collision_rate == 0
    with pytest.raises(ValueError):
        pairwise_matrix([a])


claim_st = st.sampled_from([TRUE_SPEND, DECOY])
set_st = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 5)), claim_st, max_size=20)


@given(st.lists(set_st, min_size=2, max_size=4))
def test_pairwise_rates_bounded_and_symmetric(dicts):
    hs = [H.TEN_BLOCK, H.COINBASE, H.MORDINAL, H.P2POOL]
    sets = [LabelSet(h, [Label((f"t{r}", 0), m, c, h) for (r, m), c in d.items()]) for h, d in zip(hs, dicts)]
    m = pairwise_matrix(sets)
    for i in range(len(sets)):
        for j in range(len(sets)):
            if i == j:
                continue
            cell = m[i][j]
            assert (cell.agreements, cell.collisions) == (m[j][i].agreements, m[j][i].collisions)
            for rate in (cell.collision_rate, cell.agreement_rate):
                assert rate is None or 0 <= rate <= 1


def test_effective_size_examples():
    chain = ring_chain([list(range(16)), list(range(16)), list(range(16))], 16)
    ls = LabelSet(H.COMBINED, [Label(("t0", 0), 0, DECOY, H.MORDINAL), Label(("t0", 0), 1, DECOY, H.MORDINAL),
                               Label(("t1", 0), 3, TRUE_SPEND, H.TEN_BLOCK),
                               Label(("t2", 0), 4, TRUE_SPEND, H.TEN_BLOCK),
                               Label(("t2", 0), 4, DECOY, H.COINBASE)])
    assert effective_ring_sizes(chain, ls).tolist() == [14, 1, 16]
    assert effective_ring_sizes(chain, LabelSet()).tolist() == [16, 16, 16]


def test_effective_size_recount(mixed_ledger):
    chain = mixed_ledger.chain
    combined = union([propagate_consequences(ten_block_decoy_bug(chain, window=(0, 2**40)), chain),
                      propagate_consequences(differ_by_one(chain), chain)])
    series = effective_ring_size_series(chain, combined)
    claims = defaultdict(set)
    for l in combined:
        claims[(l.ring_id, l.member)].add(l.claim)
    acc = defaultdict(lambda: [0, 0, 0])
    for tx in chain.transactions:
        month = datetime.fromtimestamp(tx.timestamp, tz=timezone.utc).strftime("%Y-%m")
        for ring in tx.inputs:
            cs = [claims.get((ring.ring_id, m), set()) for m in ring.members]
            if any(c == {TRUE_SPEND} for c in cs):
                eff = 1
            else:
                eff = max(1, len(ring.members) - sum(c == {DECOY} for c in cs))
            acc[month][0] += eff
            acc[month][1] += len(ring.members)
            acc[month][2] += 1
    assert [(b.period, b.mean_effective_ring_size, b.mean_nominal_ring_size, b.ring_count) for b in series] \
        == [(k, e / c, n / c, c) for k, (e, n, c) in sorted(acc.items())]
    for b in series:
        assert 1 <= b.mean_effective_ring_size <= b.mean_nominal_ring_size


def test_decoy_share_examples():
    chain = ring_chain([[0, 1, 2, 3], [4, 5, 6, 7]], 8)
    rows = decoy_share_series(chain, [LabelSet(H.MORDINAL)])
    assert [r.share for r in rows] == [0.0]
    full = LabelSet(H.TEN_BLOCK)
    for ring in chain.rings:
        for m in ring.members[1:]:
            full.mark(ring.ring_id, m, DECOY)
    assert decoy_share_series(chain, [full])[0].share == 3 / 4


def test_decoy_share_recount(mixed_ledger):
    chain = mixed_ledger.chain
    sets = [propagate_consequences(differ_by_one(chain), chain), propagate_consequences(zero_mixin(chain), chain)]
    rows = decoy_share_series(chain, sets)
    members = defaultdict(int)
    for tx in chain.transactions:
        for ring in tx.inputs:
            members[bucket_key(tx.timestamp)] += len(ring.members)
    for ls in sets:
        counts = defaultdict(int)
        for (ring_id, m), cs in ls.claims().items():
            if cs == {DECOY}:
                counts[bucket_key(chain.tx(ring_id[0]).timestamp)] += 1
        got = {r.period: (r.decoys, r.ring_members) for r in rows if r.heuristic == ls.heuristic.value}
        assert got == {k: (counts[k], members[k]) for k in members}


def test_coinbase_series_share():
    outs = [(g, pk(g)) for g in range(10)]
    chain = build_chain([make_tx("cb", 0, 1_640_995_200, coinbase=True, outputs=outs)])
    rows = coinbase_output_series(chain, [PayoutRecord("cb", g, "m") for g in range(7)])
    assert (rows[0].period, rows[0].coinbase_outputs, rows[0].p2pool_share) == ("2022-01", 10, 0.7)
    assert coinbase_output_series(chain)[0].p2pool_share is None


def test_coinbase_series_matches_generator_share():
    from ringtrace.synth import GeneratorConfig, MinerConfig, TxRate, generate

    cfg = GeneratorConfig(seed=2, blocks=720, block_interval=3600, start_time="2022-01-01",
                          txs_per_block=TxRate("fixed", 1),
                          miners=MinerConfig(p2pool_block_share=0.3, payout_fanout=1))
    ledger = generate(cfg)
    rows = coinbase_output_series(ledger.chain, ledger.payouts)
    for r in rows:
        assert abs(r.p2pool_share - 0.3) <= 0.05


def test_bucket_keys():
    ts = 1_672_531_199  # 2022-12-31T23:59:59Z
    assert bucket_key(ts) == "2022-12"
    assert bucket_key(ts + 1) == "2023-01"
    assert bucket_key(ts, "day") == "2022-12-31" and bucket_key(ts, "year") == "2022"
    with pytest.raises(ValueError):
        bucket_key(ts, "week")
