"""Multi-objective survivor selection over the (score, length) trade-off.

Score is maximized, pipeline length minimized. Selection keeps whole Pareto
fronts in order and cuts the last partial front by crowding distance, the
standard NSGA-II mechanism; `top` ranks individuals for transfer between
layers and for the final answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

from .pipeline import Individual, Status

__all__ = [
    "FitnessPair",
    "FrontAssignment",
    "dominates",
    "non_dominated_sort",
    "crowding_distance",
    "selection",
    "top",
]


class FitnessPair(NamedTuple):
    score: float
    length: int


@dataclass(frozen=True)
class FrontAssignment:
    """Per-individual front index (0-based) and crowding distance."""

    fronts: tuple[int, ...]
    crowding: tuple[float, ...]

    def front_members(self) -> list[list[int]]:
        n_fronts = max(self.fronts) + 1 if self.fronts else 0
        members: list[list[int]] = [[] for _ in range(n_fronts)]
        for i, f in enumerate(self.fronts):
            members[f].append(i)
        return members


def dominates(a: FitnessPair, b: FitnessPair) -> bool:
    """True iff `a` is no worse in both objectives and strictly better in one."""
    if a.score < b.score or a.length > b.length:
        return False
    return a.score > b.score or a.length < b.length


def crowding_distance(front: Sequence[FitnessPair]) -> List[float]:
    """Two-objective crowding distance with per-objective (max-min) normalization.

    Positional boundary members of each objective's stable sort get +inf; an
    objective with zero range contributes nothing to interior members.
    """
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    dist = [0.0] * n
    for values in ([f.score for f in front], [float(f.length) for f in front]):
        order = sorted(range(n), key=lambda i: values[i])  # stable: input order on ties
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = values[order[-1]] - values[order[0]]
        if span <= 0.0:
            continue
        for j in range(1, n - 1):
            i = order[j]
            if dist[i] != math.inf:
                dist[i] += (values[order[j + 1]] - values[order[j - 1]]) / span
    return dist


def non_dominated_sort(fitnesses: Sequence[FitnessPair]) -> FrontAssignment:
    """Deb-style fast non-dominated sort; deterministic for a given input order."""
    if not fitnesses:
        raise ValueError("non_dominated_sort needs a non-empty input")
    pairs = [FitnessPair(float(f[0]), int(f[1])) for f in fitnesses]
    n = len(pairs)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    dominator_count = [0] * n
    fronts = [0] * n
    current = []
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(pairs[p], pairs[q]):
                dominated_by[p].append(q)
            elif dominates(pairs[q], pairs[p]):
                dominator_count[p] += 1
        if dominator_count[p] == 0:
            fronts[p] = 0
            current.append(p)
    rank = 0
    while current:
        nxt = []
        for p in current:
            for q in dominated_by[p]:
                dominator_count[q] -= 1
                if dominator_count[q] == 0:
                    fronts[q] = rank + 1
                    nxt.append(q)
        rank += 1
        current = nxt

    crowding = [0.0] * n
    members: dict[int, list[int]] = {}
    for i, f in enumerate(fronts):
        members.setdefault(f, []).append(i)
    for idxs in members.values():
        for i, d in zip(idxs, crowding_distance([pairs[i] for i in idxs])):
            crowding[i] = d
    return FrontAssignment(tuple(fronts), tuple(crowding))


def _require_evaluated(population: Sequence[Individual]) -> list[FitnessPair]:
    pairs = []
    for ind in population:
        if ind.status is not Status.EVALUATED or ind.fitness is None:
            raise ValueError("selection input must contain only evaluated individuals")
        pairs.append(FitnessPair(ind.fitness[0], ind.fitness[1]))
    return pairs


def _ordered_indices(population: Sequence[Individual]) -> tuple[list[int], FrontAssignment]:
    """Indices ordered by (front asc, crowding desc, score desc, length asc, input order)."""
    pairs = _require_evaluated(population)
    assignment = non_dominated_sort(pairs)
    order = sorted(
        range(len(population)),
        key=lambda i: (
            assignment.fronts[i],
            -assignment.crowding[i],
            -pairs[i].score,
            pairs[i].length,
            i,
        ),
    )
    return order, assignment


def selection(population: Sequence[Individual], p: int) -> List[Individual]:
    """NSGA-II survivor selection to exactly `p` individuals.

    Whole fronts are kept in ascending order; the last partial front is cut by
    descending crowding distance (ties: score desc, length asc, input order).
    Undersized populations are oversampled by cycling the front-ordered list,
    which is how a layer grows to full size right after its first transfer.
    """
    if p <= 0:
        raise ValueError("selection size p must be >= 1")
    if not population:
        raise ValueError("selection input must be non-empty")
    order, _ = _ordered_indices(population)
    if len(order) >= p:
        chosen = order[:p]
    else:
        chosen = [order[i % len(order)] for i in range(p)]
    return [population[i] for i in chosen]


def top(population: Sequence[Individual], k: int) -> List[Individual]:
    """The k best individuals by (front asc, score desc, length asc, input order);
    returns the whole population reordered when it has fewer than k members."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not population:
        return []
    pairs = _require_evaluated(population)
    assignment = non_dominated_sort(pairs)
    order = sorted(
        range(len(population)),
        key=lambda i: (assignment.fronts[i], -pairs[i].score, pairs[i].length, i),
    )
    return [population[i] for i in order[:k]]
