"""Chain-reaction fixpoint over seed labels."""
from __future__ import annotations

import logging
import warnings
from typing import Sequence

import numpy as np

from . import kernels
from .chain import ChainStore
from .errors import ContradictionDetected
from .heuristics import propagate_consequences
from .labels import DECOY, TRUE_SPEND, HeuristicId, Label, LabelSet, union

log = logging.getLogger(__name__)


def slot_flags(labels: LabelSet, chain: ChainStore) -> tuple:
    """Per-slot ``(decoy, true_spend)`` boolean arrays for a label set."""
    decoy = np.zeros(len(chain.ring_members), dtype=bool)
    spent = np.zeros(len(chain.ring_members), dtype=bool)
    for label in labels:
        r = chain.ring_pos(label.ring_id)
        slot = chain.ring_offsets[r] + chain.rings[r].members.index(label.member)
        if label.claim is TRUE_SPEND:
            spent[slot] = True
        else:
            decoy[slot] = True
    return decoy, spent


def chain_reaction(chain: ChainStore, seed: LabelSet, heuristic=HeuristicId.CHAIN_REACTION,
                   shuffle_seed=None) -> LabelSet:
    """Eliminate known decoys and spent outputs until no ring has a single live member left.

    Promoted members are labeled TrueSpend under ChainReaction; the result
    also carries the consequences of every true spend. Rings where every
    member ends up eliminated are listed in ``result.contradictions`` and a
    ``ContradictionDetected`` warning is issued.
    """
    decoy, spent = slot_flags(seed, chain)
    final, contra = kernels.reaction_fixpoint(chain.ring_offsets, chain.ring_members,
                                              chain.ref_offsets, chain.ref_rings,
                                              decoy, spent, shuffle_seed=shuffle_seed)
    grown = seed.copy(heuristic)
    for slot in np.flatnonzero(final & ~spent).tolist():
        ring = chain.rings[chain.slot_ring[slot]]
        grown.add(Label(ring.ring_id, int(chain.ring_members[slot]), TRUE_SPEND,
                        HeuristicId.CHAIN_REACTION))
    out = propagate_consequences(grown, chain)
    out.contradictions = tuple(chain.rings[r].ring_id for r in np.flatnonzero(contra).tolist())
    if out.contradictions:
        log.info("chain reaction: %d contradictory rings", len(out.contradictions))
        warnings.warn(ContradictionDetected(out.contradictions), stacklevel=2)
    return out


def combined_chain_reaction(chain: ChainStore, all_heuristic_labels: Sequence[LabelSet]) -> tuple:
    """Run the chain reaction over the union of several label sets.

    Returns ``(labels, new_true_spends, new_decoys)`` where the counts are
    ring members whose claim appears only after combining, i.e. absent from
    every input set even after that set's own consequences are applied.
    """
    inputs = list(all_heuristic_labels)
    merged = union(inputs)
    out = chain_reaction(chain, merged, heuristic=HeuristicId.COMBINED)
    baseline = set()
    for ls in inputs:
        for label in propagate_consequences(ls, chain):
            baseline.add((label.ring_id, label.member, label.claim))
    new_ts = new_decoy = 0
    for (ring_id, member), claims in out.claims().items():
        for claim in claims:
            if (ring_id, member, claim) in baseline:
                continue
            if claim is TRUE_SPEND:
                new_ts += 1
            elif claim is DECOY:
                new_decoy += 1
    return out, new_ts, new_decoy
