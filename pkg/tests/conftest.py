import pytest

from ringtrace.chain import build_chain, make_tx
from ringtrace.synth import GeneratorConfig, MordinalConfig, TxRate, generate

T0 = 1_600_000_000  # 2020-09-13, inside the default decoy-bug window


def pk(i):
    return f"{i:064x}"


def issuance(tx_id, height, first_g, n, ts=None):
    """Input-less transaction creating outputs ``first_g .. first_g + n - 1``."""
    return make_tx(tx_id, height, T0 + 120 * height if ts is None else ts,
                   outputs=[(g, pk(g + 1000)) for g in range(first_g, first_g + n)])


def spend(tx_id, height, rings, first_g, n_out=1, **kw):
    return make_tx(tx_id, height, T0 + 120 * height, inputs=rings,
                   outputs=[(g, pk(g + 1000)) for g in range(first_g, first_g + n_out)], **kw)


@pytest.fixture
def fig1_chain():
    """Two single-member rings spend 6 and 8; elimination then resolves 7 and 9."""
    txs = [
        issuance("seed", 0, 0, 10),
        spend("r1", 20, [[6]], 10),
        spend("r2", 20, [[8]], 11),
        spend("r3", 21, [[6, 7, 8]], 12),
        spend("r4", 22, [[7, 8, 9]], 13),
    ]
    return build_chain(txs)


@pytest.fixture(scope="session")
def mixed_ledger():
    cfg = GeneratorConfig(seed=11, blocks=500, block_interval=7200, zero_mixin_rate=0.03,
                          txs_per_block=TxRate("poisson", 4),
                          mordinal=MordinalConfig(mint_rate=0.2, transfer_rate=0.2))
    return generate(cfg)


def ring_chain(rings, n_outputs):
    """Seed output ``g`` is created at height ``g``; ring ``i`` is spent at height ``n_outputs + i``."""
    txs = [issuance(f"seed{g}", g, g, 1) for g in range(n_outputs)]
    for i, r in enumerate(rings):
        txs.append(spend(f"t{i}", n_outputs + i, [list(r)], n_outputs + i))
    return build_chain(txs)


def random_rings(rnd, n_outputs, n_rings, max_size):
    return [rnd.sample(range(n_outputs), rnd.randint(1, min(max_size, n_outputs))) for _ in range(n_rings)]


def naive_fixpoint(chain, decoy, spent):
    """Repeat full rescans against the state at the start of each pass until nothing changes."""
    from collections import Counter

    members = chain.ring_members.tolist()
    offsets = chain.ring_offsets.tolist()
    ts = [bool(x) for x in spent]
    dec = [bool(x) for x in decoy]

    def live_slots(r, by_out, by_ring):
        out = []
        for s in range(offsets[r], offsets[r + 1]):
            own = 1 if ts[s] else 0
            if dec[s] or by_out[members[s]] - own or by_ring[r] - own:
                continue
            out.append(s)
        return out

    while True:
        by_out = Counter(members[s] for s in range(len(ts)) if ts[s])
        by_ring = Counter(int(chain.slot_ring[s]) for s in range(len(ts)) if ts[s])
        new = []
        for r in range(chain.n_rings):
            live = live_slots(r, by_out, by_ring)
            if len(live) == 1 and not ts[live[0]]:
                new.append(live[0])
        if not new:
            contra = [not live_slots(r, by_out, by_ring) for r in range(chain.n_rings)]
            return ts, contra
        for s in new:
            ts[s] = True


ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    """Remember one acceptance verdict; printed at the end of the run."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
