"""Traceability heuristics for ring-signature ledgers."""
from .chain import BURN_KEYS, ChainStore, InputRing, OutputRecord, TransactionRecord, build_chain, make_tx, member_age
from .heuristics import (
    coinbase_decoys,
    coinbase_threshold_sweep,
    differ_by_one,
    mordinal_decoys,
    mordinal_transactions,
    p2pool_output_merging,
    propagate_consequences,
    ten_block_decoy_bug,
    zero_mixin,
)
from .ingest import GroundTruth, PayoutRecord, parse_chain_file, parse_ground_truth, parse_payouts
from .kernels import BACKEND
from .labels import Claim, HeuristicId, Label, LabelSet, read_labels, union, write_labels
from .metrics import (
    coinbase_output_series,
    decoy_share_series,
    effective_ring_size_series,
    labelset_as_truth,
    pairwise_matrix,
    precision,
    precision_report,
    self_collision_rate,
)
from .reaction import chain_reaction, combined_chain_reaction
from .synth import GeneratorConfig, describe, generate, load_config

__version__ = "0.1.0"
