"""Non-dominated sorting and elitist survival under constraint domination."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..metrics import ObjectiveVector, constrained_dominates, crowding_distance


def _as_vectors(items: Sequence) -> list[ObjectiveVector]:
    out = []
    for it in items:
        if isinstance(it, ObjectiveVector):
            out.append(it)
        elif hasattr(it, "objective_vector"):
            out.append(it.objective_vector())
        else:
            out.append(ObjectiveVector(tuple(float(x) for x in it)))
    return out


def fast_nondominated_sort(items: Sequence) -> list[list[int]]:
    """Partition indices into fronts F1, F2, ... under constraint domination.

    Accepts ObjectiveVectors, objects exposing ``objective_vector()``, or
    plain value tuples (treated as feasible).  Front order and the index
    order inside each front are deterministic (ascending indices).
    """
    vecs = _as_vectors(items)
    n = len(vecs)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    n_dominators = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if constrained_dominates(vecs[i], vecs[j]):
                dominated_by[i].append(j)
                n_dominators[j] += 1
            elif constrained_dominates(vecs[j], vecs[i]):
                dominated_by[j].append(i)
                n_dominators[i] += 1
    fronts = []
    current = [i for i in range(n) if n_dominators[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                n_dominators[j] -= 1
                if n_dominators[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def rank_and_crowd(items: Sequence) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
    """Per-individual front rank (0-based) and within-front crowding
    distance, computed on the raw objective values."""
    vecs = _as_vectors(items)
    fronts = fast_nondominated_sort(vecs)
    rank = np.zeros(len(vecs), dtype=int)
    crowd = np.zeros(len(vecs), dtype=float)
    for r, front in enumerate(fronts):
        vals = np.array([vecs[i].values for i in front], dtype=float)
        dist = crowding_distance(vals)
        for i, d in zip(front, dist):
            rank[i] = r
            crowd[i] = d
    return rank, crowd, fronts


def nsga_survival(items: Sequence, n_keep: int) -> list[int]:
    """Elitist environmental selection: fill front by front; the first front
    that overflows is truncated by descending crowding distance, breaking
    exact ties by ascending index.  Returns kept indices in that order."""
    if n_keep < 0:
        raise ValueError(f"n_keep must be >= 0, got {n_keep}")
    if n_keep >= len(items):
        return list(range(len(items)))
    _, crowd, fronts = rank_and_crowd(items)
    kept: list[int] = []
    for front in fronts:
        if len(kept) + len(front) <= n_keep:
            kept.extend(front)
            if len(kept) == n_keep:
                break
        else:
            need = n_keep - len(kept)
            ordered = sorted(front, key=lambda i: (-crowd[i], i))
            kept.extend(ordered[:need])
            break
    return kept
