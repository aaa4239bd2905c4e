"""Gibbs sampler over variable orderings via the relocation move.

Each step picks a variable uniformly at random, scores the orderings
obtained by inserting it at every position, and samples the new position
with probability proportional to the exponentiated scores.  Because the
order score is a sum of per-position local order scores, the p candidate
scores are computed incrementally by adjacent swaps, each touching only the
two affected terms, so one move costs O(p) table lookups.  The move is a
Gibbs update on the variable's position, so the normalized order posterior
is stationary for the chain.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import ValidationError, validate_order
from .scoring import ScoreTables


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 5000
    burn_in: Optional[int] = None  # defaults to 20% of iterations
    seed: int = 0
    thin: int = 1
    init: Union[str, tuple[int, ...]] = "random"

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed))
        burn = self.iterations // 5 if self.burn_in is None else self.burn_in
        object.__setattr__(self, "burn_in", int(burn))
        if not (self.iterations > self.burn_in >= 0):
            raise ValidationError(
                f"need iterations > burn_in >= 0, got {self.iterations}, {self.burn_in}"
            )
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if self.init != "random":
            object.__setattr__(self, "init", tuple(int(v) for v in self.init))


@dataclass
class ChainTrace:
    """Recorded (ordering, log score) samples plus move bookkeeping."""

    samples: list[tuple[tuple[int, ...], float]] = field(default_factory=list)
    move_distances: Counter = field(default_factory=Counter)
    config: Optional[ChainConfig] = None


def _candidate_scores(order, score, v_pos, tables) -> list[float]:
    """Scores of the orderings with order[v_pos] relocated to each position."""
    pp = tables.pp
    los = tables.los
    p = len(order)
    v = order[v_pos]
    k_v = pp[v]
    scores = [0.0] * p
    scores[v_pos] = score

    # sweep the chosen variable toward the front
    preds = set(order[:v_pos])  # predecessors of v in the current candidate
    acc = score
    for a in range(v_pos, 0, -1):
        u = order[a - 1]
        k_u = pp[u]
        preds_wo_u = preds - {u}
        acc += (
            los(v, k_v & preds_wo_u)
            + los(u, k_u & (preds_wo_u | {v}))
            - los(v, k_v & preds)
            - los(u, k_u & preds_wo_u)
        )
        scores[a - 1] = acc
        preds = preds_wo_u

    # sweep toward the back
    preds = set(order[:v_pos])
    acc = score
    for a in range(v_pos, p - 1):
        u = order[a + 1]
        k_u = pp[u]
        preds_w_u = preds | {u}
        acc += (
            los(v, k_v & preds_w_u)
            + los(u, k_u & preds)
            - los(v, k_v & preds)
            - los(u, k_u & (preds | {v}))
        )
        scores[a + 1] = acc
        preds = preds_w_u
    return scores


def relocation_step(
    order: Sequence[int],
    tables: ScoreTables,
    rng: np.random.Generator,
    score: Optional[float] = None,
) -> tuple[tuple[int, ...], float, int]:
    """One Gibbs update: relocate a uniformly chosen variable.

    Returns (new order, its log score, relocation distance).  ``score`` may
    pass in the current order's score to avoid recomputation.
    """
    order = tuple(order)
    p = len(order)
    if score is None:
        score = tables.order_score(order)
    if p == 1:
        return order, score, 0
    v_pos = int(rng.integers(p))
    scores = _candidate_scores(order, score, v_pos, tables)
    arr = np.array(scores)
    w = np.exp(arr - arr.max())
    new_pos = int(rng.choice(p, p=w / w.sum()))
    if new_pos == v_pos:
        return order, score, 0
    lst = list(order)
    v = lst.pop(v_pos)
    lst.insert(new_pos, v)
    return tuple(lst), scores[new_pos], abs(new_pos - v_pos)


def run_chain(tables: ScoreTables, config: ChainConfig) -> ChainTrace:
    """Run the relocation sampler; deterministic given config.seed.

    Post-burn-in states are recorded every ``thin`` steps along with their
    scores.
    """
    rng = np.random.default_rng(config.seed)
    p = tables.space.p
    if config.init == "random":
        order = tuple(int(v) for v in rng.permutation(p))
    else:
        order = validate_order(config.init, p)
    score = tables.order_score(order)
    trace = ChainTrace(config=config)
    for step in range(1, config.iterations + 1):
        order, score, dist = relocation_step(order, tables, rng, score)
        trace.move_distances[dist] += 1
        if step > config.burn_in and (step - config.burn_in - 1) % config.thin == 0:
            trace.samples.append((order, score))
    return trace


def map_order(trace: ChainTrace) -> tuple[int, ...]:
    """The sampled ordering with maximal recorded score; first occurrence wins ties."""
    if not trace.samples:
        raise ValidationError("trace holds no samples")
    best_order, best_score = trace.samples[0]
    for order, score in trace.samples[1:]:
        if score > best_score:
            best_order, best_score = order, score
    return best_order


def dump_trace(trace: ChainTrace, fh) -> None:
    """One line per recorded sample: iteration, log score, comma-joined order."""
    config = trace.config
    start = (config.burn_in + 1) if config else 1
    thin = config.thin if config else 1
    for idx, (order, score) in enumerate(trace.samples):
        it = start + idx * thin
        fh.write(f"{it}\t{score:.12g}\t{','.join(map(str, order))}\n")
