"""Deterministic synthetic ledger generator with planted wallet behaviors and full ground truth.

Wallet policies
    ``Correct``       decoys drawn from a recency-biased age distribution (ages >= lock).
    ``TenBlockBug``   same distribution but never picks a decoy exactly ``lock_blocks`` old.
    ``CachedDecoys``  reuses its previous ring's decoys for the next ``cache_reuse - 1`` rings.

Output ownership is tracked per policy rather than per wallet; only the decoy
cache is per wallet. Decoy ages are log-uniform with a shape knob and make no
claim to match any real wallet's selector.
"""
from __future__ import annotations

import bisect
import json
import math
import random
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .chain import BURN_KEYS, ChainStore, build_chain, make_tx
from .errors import InfeasibleConfig
from .heuristics import day_start
from .ingest import (
    GroundTruth,
    PayoutRecord,
    atomic_write,
    chain_to_text,
    payouts_to_text,
    truth_to_text,
)

POLICIES = ("Correct", "TenBlockBug", "CachedDecoys")
CHAIN_FILE = "chain.jsonl"
PAYOUTS_FILE = "payouts.csv"
TRUTH_FILE = "truth.csv"


@dataclass
class TxRate:
    kind: str = "poisson"  # "fixed" or "poisson"
    mean: float = 4.0


@dataclass
class MinerConfig:
    miner_count: int = 20
    p2pool_launch: object = "2021-10-01"
    p2pool_block_share: float = 0.5
    payout_fanout: int = 8
    consolidation_inputs: tuple = (4, 12)
    pool_payout_inputs: int = 1
    pool_payout_outputs: int = 4
    pool_spend_delay: int = 20


@dataclass
class MordinalConfig:
    start: object = None
    end: object = None
    mint_rate: float = 0.0
    transfer_rate: float = 0.0


@dataclass
class GeneratorConfig:
    seed: int = 0
    blocks: int = 1000
    start_time: object = "2021-09-01"
    block_interval: int = 120
    lock_blocks: int = 10
    ring_size: int = 16
    zero_mixin_rate: float = 0.0
    txs_per_block: TxRate = field(default_factory=TxRate)
    input_count_weights: tuple = (0.6, 0.3, 0.1)
    outputs_per_tx: int = 2
    wallets: int = 100
    wallet_population: tuple = (("Correct", 0.7), ("TenBlockBug", 0.2), ("CachedDecoys", 0.1))
    fast_spend: dict = field(default_factory=lambda: {"Correct": 0.05, "TenBlockBug": 0.4,
                                                       "CachedDecoys": 0.05})
    decoy_shape: float = 1.0
    spend_shape: float = 1.0
    cache_reuse: int = 2
    miners: MinerConfig = field(default_factory=MinerConfig)
    mordinal: MordinalConfig = field(default_factory=MordinalConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InfeasibleConfig(f"unknown config field(s): {', '.join(sorted(unknown))}")
        try:
            if "txs_per_block" in data:
                data["txs_per_block"] = TxRate(**data["txs_per_block"])
            if "miners" in data:
                m = dict(data["miners"])
                if "consolidation_inputs" in m:
                    m["consolidation_inputs"] = tuple(m["consolidation_inputs"])
                data["miners"] = MinerConfig(**m)
            if "mordinal" in data:
                data["mordinal"] = MordinalConfig(**data["mordinal"])
        except TypeError as exc:
            raise InfeasibleConfig(f"bad config section: {exc}") from None
        if "wallet_population" in data:
            pop = data["wallet_population"]
            if isinstance(pop, dict):
                pop = list(pop.items())
            data["wallet_population"] = tuple((str(p), float(w)) for p, w in pop)
        if "input_count_weights" in data:
            data["input_count_weights"] = tuple(float(w) for w in data["input_count_weights"])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wallet_population"] = [list(p) for p in self.wallet_population]
        d["input_count_weights"] = list(self.input_count_weights)
        d["miners"]["consolidation_inputs"] = list(self.miners.consolidation_inputs)
        return d

    def validate(self) -> None:
        problems = []
        if self.blocks < 1:
            problems.append("blocks must be >= 1")
        if self.ring_size < 1:
            problems.append("ring_size must be >= 1")
        if self.lock_blocks < 1:
            problems.append("lock_blocks must be >= 1")
        if self.block_interval < 1:
            problems.append("block_interval must be >= 1")
        if self.txs_per_block.kind not in ("fixed", "poisson") or self.txs_per_block.mean < 0:
            problems.append("txs_per_block needs kind fixed|poisson and mean >= 0")
        if not self.wallet_population:
            problems.append("wallet_population is empty")
        for policy, weight in self.wallet_population:
            if policy not in POLICIES:
                problems.append(f"unknown policy {policy!r}")
            if weight <= 0:
                problems.append(f"weight for {policy} must be positive")
        if self.wallets < len(self.wallet_population):
            problems.append("need at least one wallet per policy")
        if not self.input_count_weights or min(self.input_count_weights) < 0 or sum(self.input_count_weights) <= 0:
            problems.append("input_count_weights must be non-negative with a positive sum")
        if self.outputs_per_tx < 1:
            problems.append("outputs_per_tx must be >= 1")
        if not 0 <= self.zero_mixin_rate <= 1:
            problems.append("zero_mixin_rate must be in [0, 1]")
        if self.cache_reuse < 1:
            problems.append("cache_reuse must be >= 1")
        for p, f in self.fast_spend.items():
            if p not in POLICIES or not 0 <= f <= 1:
                problems.append(f"fast_spend[{p}] invalid")
        m = self.miners
        lo, hi = m.consolidation_inputs
        if m.miner_count < 1 or m.payout_fanout < 1 or not 1 <= lo <= hi:
            problems.append("miner settings need miner_count, payout_fanout >= 1 and 1 <= min <= max inputs")
        if not 0 <= m.p2pool_block_share <= 1:
            problems.append("p2pool_block_share must be in [0, 1]")
        if m.pool_payout_inputs < 1 or m.pool_payout_outputs < 1:
            problems.append("pool payout inputs/outputs must be >= 1")
        if m.pool_spend_delay < self.lock_blocks:
            problems.append("pool_spend_delay must be >= lock_blocks")
        if self.mordinal.mint_rate < 0 or self.mordinal.transfer_rate < 0:
            problems.append("mordinal rates must be >= 0")
        if problems:
            raise InfeasibleConfig("; ".join(problems))

    # derived schedule -------------------------------------------------------
    def block_time(self, h: int) -> int:
        return day_start(self.start_time) + h * self.block_interval

    def is_p2pool_era(self, h: int) -> bool:
        launch = self.miners.p2pool_launch
        return launch is not None and self.block_time(h) >= day_start(launch)

    def in_mordinal_window(self, h: int) -> bool:
        t = self.block_time(h)
        mo = self.mordinal
        if mo.start is not None and t < day_start(mo.start):
            return False
        if mo.end is not None and t >= day_start(mo.end) + 86400:
            return False
        return True


def load_config(path) -> GeneratorConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InfeasibleConfig(f"{path}: invalid JSON: {exc.msg}") from None
    return GeneratorConfig.from_dict(data)


def describe(config: GeneratorConfig) -> dict:
    """Expected counts for a config, independent of the random draws."""
    config.validate()
    post = sum(1 for h in range(config.blocks) if config.is_p2pool_era(h))
    pre = config.blocks - post
    share = config.miners.p2pool_block_share
    fanout = config.miners.payout_fanout
    mordinal_blocks = sum(1 for h in range(config.blocks) if config.in_mordinal_window(h))
    return {
        "blocks": config.blocks,
        "coinbase_txs": config.blocks,
        "expected_user_txs": config.blocks * config.txs_per_block.mean,
        "user_txs_variance": config.blocks * config.txs_per_block.mean
        if config.txs_per_block.kind == "poisson" else 0.0,
        "expected_coinbase_outputs": pre + post * (share * fanout + (1 - share)),
        "expected_payout_records": post * share * fanout,
        "expected_mordinal_mints": mordinal_blocks * config.mordinal.mint_rate,
        "p2pool_era_blocks": post,
    }


@dataclass
class SyntheticLedger:
    config: GeneratorConfig
    transactions: list
    payouts: list
    truth: GroundTruth
    stats: dict
    planted_pairs: list
    policy_of_ring: dict
    tx_kind: dict
    _chain: Optional[ChainStore] = None

    @property
    def chain(self) -> ChainStore:
        if self._chain is None:
            self._chain = build_chain(self.transactions)
        return self._chain

    def texts(self) -> dict:
        return {
            CHAIN_FILE: chain_to_text(self.transactions),
            PAYOUTS_FILE: payouts_to_text(self.payouts),
            TRUTH_FILE: truth_to_text(self.truth),
        }

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, text in self.texts().items():
            atomic_write(out / name, text)
            paths[name] = out / name
        return paths


class _HeightPool:
    """Unspent outputs bucketed by creation height, with O(log n) nearest-height lookup."""

    def __init__(self):
        self.by_height = defaultdict(list)
        self.heights = []

    def put(self, g: int, h: int) -> None:
        bucket = self.by_height[h]
        if not bucket:
            bisect.insort(self.heights, h)
        bucket.append(g)

    def take_at(self, h: int, rnd) -> Optional[int]:
        bucket = self.by_height.get(h)
        if not bucket:
            return None
        i = rnd.randrange(len(bucket))
        bucket[i], bucket[-1] = bucket[-1], bucket[i]
        g = bucket.pop()
        if not bucket:
            del self.heights[bisect.bisect_left(self.heights, h)]
        return g

    def take_near(self, target: int, max_height: int, rnd) -> Optional[int]:
        i = bisect.bisect_right(self.heights, target) - 1
        if i >= 0:
            return self.take_at(self.heights[i], rnd)
        if self.heights and self.heights[0] <= max_height:
            return self.take_at(self.heights[0], rnd)
        return None

    def count_upto(self, max_height: int) -> int:
        i = bisect.bisect_right(self.heights, max_height)
        return sum(len(self.by_height[h]) for h in self.heights[:i])


class _Generator:
    def __init__(self, config: GeneratorConfig):
        config.validate()
        self.cfg = config
        self.rnd = random.Random(config.seed)
        self.nprng = np.random.default_rng(config.seed)
        self.lock = config.lock_blocks
        self.txs = []
        self.payouts = []
        self.truth = {}
        self.policy_of_ring = {}
        self.tx_kind = {}
        self.planted = []
        self.stats = defaultdict(int)
        self.out_height = []      # g -> height
        self.burned = []          # g -> bool
        self.height_first = []    # h -> first g created at h
        self.height_count = []
        self.burn_outputs = []    # (g, h)
        self.user_pool = {p: _HeightPool() for p in POLICIES}
        self.pool_queue = deque()  # centralized-pool coinbase outputs (g, h)
        self.miner_payouts = defaultdict(deque)
        self.mordinal_pool = _HeightPool()
        self.cache = {}
        self.burn_tx_done = False

        self.wallet_policy = self._allocate(config.wallets)
        self.miner_ids = [f"miner{i:03d}" for i in range(config.miners.miner_count)]
        self.miner_policy = dict(zip(self.miner_ids, self._allocate(len(self.miner_ids))))
        self.miner_threshold = {m: self._consolidation_size() for m in self.miner_ids}
        weights = [w for _, w in config.wallet_population]
        self.pool_policy = self.rnd.choices([p for p, _ in config.wallet_population], weights)[0]

    def _allocate(self, n: int) -> list:
        """Largest-remainder split of ``n`` slots across policies, then shuffled."""
        pop = self.cfg.wallet_population
        total = sum(w for _, w in pop)
        quotas = [n * w / total for _, w in pop]
        counts = [int(q) for q in quotas]
        order = sorted(range(len(pop)), key=lambda i: (counts[i] - quotas[i], i))
        for i in order[: n - sum(counts)]:
            counts[i] += 1
        out = [p for (p, _), c in zip(pop, counts) for _ in range(c)]
        self.rnd.shuffle(out)
        return out

    def _consolidation_size(self) -> int:
        lo, hi = self.cfg.miners.consolidation_inputs
        return self.rnd.randint(lo, hi)

    # -- identifiers ---------------------------------------------------------
    def _hex(self) -> str:
        return f"{self.rnd.getrandbits(256):064x}"

    def _new_outputs(self, h: int, n: int, keys=None) -> list:
        outs = []
        for i in range(n):
            g = len(self.out_height)
            pk = keys[i] if keys is not None else self._hex()
            self.out_height.append(h)
            self.burned.append(pk in BURN_KEYS)
            outs.append((g, pk))
        return outs

    # -- age sampling --------------------------------------------------------
    def _age(self, h: int, shape: float) -> int:
        oldest = h
        if oldest <= self.lock:
            return self.lock
        span = math.log(oldest + 1) - math.log(self.lock)
        u = self.rnd.random() ** shape
        return min(oldest, max(self.lock, int(math.exp(math.log(self.lock) + u * span))))

    def _eligible_count(self, h: int, policy: str) -> int:
        top = h - self.lock - (1 if policy == "TenBlockBug" else 0)
        if top < 0:
            return 0
        return self.height_first[top] + self.height_count[top]

    def _decoys(self, h: int, policy: str, exclude: set, k: int) -> list:
        """``k`` distinct decoys for a ring spent at height ``h``."""
        picked = []
        seen = set(exclude)
        bugged = policy == "TenBlockBug"
        if self._eligible_count(h, policy) < k + len(exclude):
            raise InfeasibleConfig(f"not enough mature outputs at height {h} for ring size {k + 1}")
        attempts = 0
        while len(picked) < k:
            attempts += 1
            if attempts > 50 * k + 100:
                break
            age = self._age(h, self.cfg.decoy_shape)
            if bugged and age == self.lock:
                continue
            t = h - age
            g = self.height_first[t] + self.rnd.randrange(self.height_count[t])
            if g in seen:
                continue
            seen.add(g)
            picked.append(g)
        if len(picked) < k:
            top = h - self.lock - (1 if bugged else 0)
            limit = self.height_first[top] + self.height_count[top]
            for g in range(limit - 1, -1, -1):
                if g not in seen:
                    seen.add(g)
                    picked.append(g)
                    if len(picked) == k:
                        break
        return picked

    def _burn_decoys(self, h: int, policy: str, spend: int, k: int) -> list:
        bugged = policy == "TenBlockBug"
        usable = [g for g, bh in self.burn_outputs
                  if h - bh >= self.lock and not (bugged and h - bh == self.lock) and g != spend]
        if len(usable) >= k:
            return self.rnd.sample(usable, k)
        return usable + self._decoys(h, policy, set(usable) | {spend}, k - len(usable))

    # -- ring assembly -------------------------------------------------------
    def _ring(self, tx_id: str, pos: int, h: int, spend: int, policy: str, wallet=None,
              burn_padding: bool = False) -> list:
        k = self.cfg.ring_size - 1
        ring_id = (tx_id, pos)
        if burn_padding:
            decoys = self._burn_decoys(h, policy, spend, k)
        elif k == 0 or self.rnd.random() < self.cfg.zero_mixin_rate:
            decoys = []
        elif policy == "CachedDecoys" and wallet is not None:
            cached = self.cache.get(wallet)
            if cached and cached[1] > 0 and spend not in cached[0]:
                decoys, uses, first = cached
                self.cache[wallet] = (decoys, uses - 1, first)
                self.planted.append((first, ring_id))
                self.stats["cached_rings"] += 1
            else:
                decoys = self._decoys(h, policy, {spend}, k)
                self.cache[wallet] = (tuple(decoys), self.cfg.cache_reuse - 1, ring_id)
        else:
            decoys = self._decoys(h, policy, {spend}, k)
        self.truth[ring_id] = spend
        self.policy_of_ring[ring_id] = policy
        return sorted([spend, *decoys])

    def _spend_user(self, h: int, policy: str) -> Optional[int]:
        pool = self.user_pool[policy]
        if self.rnd.random() < self.cfg.fast_spend.get(policy, 0.0):
            g = pool.take_at(h - self.lock, self.rnd)
            if g is not None:
                return g
        return pool.take_near(h - self._age(h, self.cfg.spend_shape), h - self.lock, self.rnd)

    def _emit(self, kind, tx_id, h, t, *, coinbase=False, tags=(), inputs=(), outputs=()):
        self.tx_kind[tx_id] = kind
        self.txs.append(make_tx(tx_id, h, t, coinbase=coinbase, extra_tags=tags,
                                inputs=inputs, outputs=outputs))

    def _give_user(self, outs, h, policies) -> None:
        for (g, _), p in zip(outs, policies):
            self.user_pool[p].put(g, h)

    def _ready(self, h: int) -> bool:
        return self._eligible_count(h, "TenBlockBug") >= 2 * self.cfg.ring_size + 4

    # -- block assembly ------------------------------------------------------
    def block(self, h: int) -> None:
        cfg = self.cfg
        t = cfg.block_time(h)
        self.height_first.append(len(self.out_height))
        self._coinbase(h, t)
        ready = self._ready(h)
        if ready:
            self._pool_payouts(h, t)
            self._consolidations(h, t)
            if not self.burn_tx_done and (cfg.mordinal.transfer_rate > 0 or cfg.mordinal.mint_rate > 0):
                self._burn_tx(h, t)
        if cfg.in_mordinal_window(h):
            for _ in range(int(self.nprng.poisson(cfg.mordinal.mint_rate)) if cfg.mordinal.mint_rate else 0):
                self._mint(h, t, ready)
            if ready:
                for _ in range(int(self.nprng.poisson(cfg.mordinal.transfer_rate))
                               if cfg.mordinal.transfer_rate else 0):
                    self._transfer(h, t)
        rate = cfg.txs_per_block
        n = int(rate.mean) if rate.kind == "fixed" else int(self.nprng.poisson(rate.mean))
        for _ in range(n):
            self._user_tx(h, t, ready)
        self.height_count.append(len(self.out_height) - self.height_first[h])

    def _coinbase(self, h, t):
        cfg = self.cfg
        tx_id = self._hex()
        if cfg.is_p2pool_era(h) and self.rnd.random() < cfg.miners.p2pool_block_share:
            outs = self._new_outputs(h, cfg.miners.payout_fanout)
            for g, _ in outs:
                miner = self.rnd.choice(self.miner_ids)
                self.miner_payouts[miner].append((g, h))
                self.payouts.append(PayoutRecord(tx_id, g, miner))
            self.stats["p2pool_coinbase_outputs"] += len(outs)
        else:
            outs = self._new_outputs(h, 1)
            self.pool_queue.append((outs[0][0], h))
        self.stats["coinbase_txs"] += 1
        self.stats["coinbase_outputs"] += len(outs)
        self._emit("coinbase", tx_id, h, t, coinbase=True, outputs=outs)

    def _pool_payouts(self, h, t):
        m = self.cfg.miners
        while len(self.pool_queue) >= m.pool_payout_inputs and \
                h - self.pool_queue[m.pool_payout_inputs - 1][1] >= m.pool_spend_delay:
            spends = [self.pool_queue.popleft()[0] for _ in range(m.pool_payout_inputs)]
            tx_id = self._hex()
            inputs = [self._ring(tx_id, i, h, g, self.pool_policy) for i, g in enumerate(spends)]
            outs = self._new_outputs(h, m.pool_payout_outputs)
            self._give_user(outs, h, [self.rnd.choice(self.wallet_policy) for _ in outs])
            self._emit("pool_payout", tx_id, h, t, inputs=inputs, outputs=outs)
            self.stats["pool_payout_txs"] += 1

    def _consolidations(self, h, t):
        for miner in self.miner_ids:
            queue = self.miner_payouts[miner]
            need = self.miner_threshold[miner]
            if len(queue) < need or h - queue[need - 1][1] < self.lock:
                continue
            spends = [queue.popleft()[0] for _ in range(need)]
            policy = self.miner_policy[miner]
            tx_id = self._hex()
            inputs = [self._ring(tx_id, i, h, g, policy) for i, g in enumerate(spends)]
            outs = self._new_outputs(h, 1)
            self._give_user(outs, h, [policy])
            self._emit("consolidation", tx_id, h, t, inputs=inputs, outputs=outs)
            self.miner_threshold[miner] = self._consolidation_size()
            self.stats["consolidation_txs"] += 1
            self.stats["consolidation_inputs"] += need

    def _burn_tx(self, h, t):
        wallet = self.rnd.randrange(self.cfg.wallets)
        policy = self.wallet_policy[wallet]
        spend = self._spend_user(h, policy)
        if spend is None:
            return
        tx_id = self._hex()
        ring = self._ring(tx_id, 0, h, spend, policy, wallet)
        n = 2 * self.cfg.ring_size
        outs = self._new_outputs(h, n, [BURN_KEYS[i % 2] for i in range(n)])
        self.burn_outputs.extend((g, h) for g, _ in outs)
        self._emit("burn", tx_id, h, t, inputs=[ring], outputs=outs)
        self.burn_tx_done = True
        self.stats["burn_txs"] += 1

    def _mint(self, h, t, ready):
        wallet = self.rnd.randrange(self.cfg.wallets)
        policy = self.wallet_policy[wallet]
        tx_id = self._hex()
        inputs = []
        if ready:
            spend = self._spend_user(h, policy)
            if spend is not None:
                inputs = [self._ring(tx_id, 0, h, spend, policy, wallet)]
        outs = self._new_outputs(h, 2)
        self.mordinal_pool.put(outs[0][0], h)
        self._give_user(outs[1:], h, [policy])
        self._emit("mordinal_mint", tx_id, h, t, tags=("10",), inputs=inputs, outputs=outs)
        self.stats["mordinal_mints"] += 1

    def _transfer(self, h, t):
        spend = self.mordinal_pool.take_near(h - self.lock, h - self.lock, self.rnd)
        if spend is None:
            return
        policy = self.rnd.choice(self.wallet_policy)
        tx_id = self._hex()
        ring = self._ring(tx_id, 0, h, spend, policy, burn_padding=True)
        outs = self._new_outputs(h, 2)
        self.mordinal_pool.put(outs[0][0], h)
        self._give_user(outs[1:], h, [self.rnd.choice(self.wallet_policy)])
        self._emit("mordinal_transfer", tx_id, h, t, tags=("11",), inputs=[ring], outputs=outs)
        self.stats["mordinal_transfers"] += 1

    def _user_tx(self, h, t, ready):
        cfg = self.cfg
        wallet = self.rnd.randrange(cfg.wallets)
        policy = self.wallet_policy[wallet]
        tx_id = self._hex()
        inputs = []
        if ready:
            n_in = self.rnd.choices(range(1, len(cfg.input_count_weights) + 1), cfg.input_count_weights)[0]
            for _ in range(n_in):
                spend = self._spend_user(h, policy)
                if spend is None:
                    break
                inputs.append(self._ring(tx_id, len(inputs), h, spend, policy, wallet))
        outs = self._new_outputs(h, cfg.outputs_per_tx)
        owners = [self.rnd.choice(self.wallet_policy)] + [policy] * (len(outs) - 1)
        self._give_user(outs, h, owners)
        self._emit("user", tx_id, h, t, inputs=inputs, outputs=outs)
        self.stats["user_txs"] += 1
        if not inputs:
            self.stats["issuance_txs"] += 1

    def run(self) -> SyntheticLedger:
        for h in range(self.cfg.blocks):
            self.block(h)
        if self.cfg.txs_per_block.mean > 0 and not self.truth:
            raise InfeasibleConfig(
                f"{self.cfg.blocks} blocks never accumulate enough mature outputs for ring size "
                f"{self.cfg.ring_size}; add blocks or transactions")
        self.stats["rings"] = len(self.truth)
        self.stats["payout_records"] = len(self.payouts)
        self.stats["planted_pairs"] = len(self.planted)
        return SyntheticLedger(self.cfg, self.txs, self.payouts, GroundTruth(dict(self.truth)),
                               dict(self.stats), list(self.planted), dict(self.policy_of_ring),
                               dict(self.tx_kind))


def generate(config: GeneratorConfig) -> SyntheticLedger:
    """Generate a ledger; identical configs give identical ledgers."""
    return _Generator(config).run()
