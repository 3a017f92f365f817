"""
Non-dominated sorting, crowding distance and elitist selection (NSGA-II).

Every objective is minimised. Vectors are plain sequences, so both
ObjectiveVector and bare tuples are accepted.
"""

import math
from dataclasses import dataclass
from typing import Any, List, Sequence

from src.core.errors import InputError, SelectionError


Vector = Sequence[float]


@dataclass
class RankedIndividual:
    objectives: Vector
    rank: int = 0
    crowding: float = 0.0
    item: Any = None
    feasible: bool = True


def dominates(a: Vector, b: Vector) -> bool:
    """True when a is no worse than b everywhere and strictly better once."""
    strictly_better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strictly_better = True
    return strictly_better


def fast_non_dominated_sort(pop: Sequence[Vector]) -> List[List[int]]:
    """Indices of pop grouped into fronts; front 0 is non-dominated."""
    n = len(pop)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    fronts: List[List[int]] = [[]]

    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(pop[p], pop[q]):
                dominated_by[p].append(q)
            elif dominates(pop[q], pop[p]):
                counts[p] += 1
        if counts[p] == 0:
            fronts[0].append(p)

    i = 0
    while fronts[i]:
        next_front = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    next_front.append(q)
        i += 1
        fronts.append(sorted(next_front))
    fronts.pop()
    return fronts


def crowding_distance(front: Sequence[Vector]) -> List[float]:
    """
    Crowding distance per member. Boundary members of every objective get
    infinity; objectives with a zero range add nothing.
    """
    size = len(front)
    if size <= 2:
        return [math.inf] * size

    distances = [0.0] * size
    for m in range(len(front[0])):
        order = sorted(range(size), key=lambda i: (front[i][m], i))
        low = front[order[0]][m]
        high = front[order[-1]][m]
        distances[order[0]] = math.inf
        distances[order[-1]] = math.inf
        span = high - low
        if span == 0:
            continue
        for k in range(1, size - 1):
            i = order[k]
            if distances[i] == math.inf:
                continue
            distances[i] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / span
    return distances


def rank_population(vectors: Sequence[Vector], items: Sequence[Any] = None) -> List[RankedIndividual]:
    """Wrap vectors with their front rank and crowding distance (input order kept)."""
    items = list(items) if items is not None else [None] * len(vectors)
    ranked = [RankedIndividual(objectives=v, item=it) for v, it in zip(vectors, items)]
    for rank, front in enumerate(fast_non_dominated_sort(vectors)):
        distances = crowding_distance([vectors[i] for i in front])
        for i, d in zip(front, distances):
            ranked[i].rank = rank
            ranked[i].crowding = d
    return ranked


def environmental_selection(combined: Sequence[RankedIndividual],
                            size: int) -> List[RankedIndividual]:
    """
    Keep whole fronts in rank order; the front that does not fit is cut by
    descending crowding distance, ties to the lower original index.
    """
    if size <= 0:
        raise InputError("Selection size must be positive")
    if size > len(combined):
        raise InputError(f"Cannot select {size} out of {len(combined)} individuals")

    by_rank = {}
    for i, ind in enumerate(combined):
        by_rank.setdefault(ind.rank, []).append(i)

    chosen: List[int] = []
    for rank in sorted(by_rank):
        members = by_rank[rank]
        room = size - len(chosen)
        if len(members) <= room:
            chosen.extend(members)
        else:
            members = sorted(members, key=lambda i: (-combined[i].crowding, i))
            chosen.extend(members[:room])
        if len(chosen) == size:
            break
    return [combined[i] for i in chosen]


def best_solution(pop: Sequence[RankedIndividual]) -> int:
    """Index of the cheapest best-ranked feasible member (then fragmentation, then index)."""
    feasible = [i for i, ind in enumerate(pop) if ind.feasible]
    if not feasible:
        raise SelectionError("Population holds no feasible individual")
    top = min(pop[i].rank for i in feasible)
    return min(
        (i for i in feasible if pop[i].rank == top),
        key=lambda i: (pop[i].objectives[0], pop[i].objectives[1], i),
    )
