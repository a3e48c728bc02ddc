"""Ranking quality and Pareto diagnostics.

All objectives are minimized.  Rank statistics treat lower values as better
on both axes, so sign conventions match plain Kendall/Spearman on the raw
vectors.  Feasibility-aware comparisons implement constraint domination:
feasible beats infeasible, infeasible points are ordered by violation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

TOP_FRACTIONS = {"k_at_1pct": 0.01, "k_at_5pct": 0.05, "mae_at_5pct": 0.05}


def _check_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.ndim != 1 or t.ndim != 1 or p.shape != t.shape:
        raise ValueError(f"pred and truth must be equal-length 1-D, got {p.shape} vs {t.shape}")
    if p.size < 2:
        raise ValueError("need at least 2 samples")
    return p, t


def kendall_tau(pred, truth) -> float:
    """Tie-corrected Kendall tau-b."""
    p, t = _check_pair(pred, truth)
    return float(stats.kendalltau(p, t).statistic)


def spearman_rho(pred, truth) -> float:
    """Spearman rank correlation (Pearson on mid-ranks)."""
    p, t = _check_pair(pred, truth)
    return float(stats.spearmanr(p, t).statistic)


def _true_top(truth: np.ndarray, x: float) -> np.ndarray:
    n = truth.size
    m = math.ceil(x * n)
    order = np.argsort(truth, kind="stable")
    return order[:m]


def k_at_x(pred, truth, x: float) -> int:
    """Smallest k such that the predicted top-k contains the true top ceil(x*n).

    Lower is better on both vectors; prediction ties resolve by index order.
    """
    p, t = _check_pair(pred, truth)
    if not 0.0 < x <= 1.0:
        raise ValueError(f"x must be in (0, 1], got {x}")
    top = set(_true_top(t, x).tolist())
    pred_order = np.argsort(p, kind="stable")
    rank_of = {int(idx): pos for pos, idx in enumerate(pred_order)}
    return max(rank_of[i] for i in top) + 1


def mae_at_top(pred, truth, x: float) -> float:
    """Mean absolute error restricted to the true top ceil(x*n) rows."""
    p, t = _check_pair(pred, truth)
    if not 0.0 < x <= 1.0:
        raise ValueError(f"x must be in (0, 1], got {x}")
    sel = _true_top(t, x)
    return float(np.abs(p[sel] - t[sel]).mean())


def rank_report(pred, truth) -> dict[str, float]:
    """The standard block of ranking stats for one evaluation."""
    p, t = _check_pair(pred, truth)
    return {
        "tau": kendall_tau(p, t),
        "rho": spearman_rho(p, t),
        "mae": float(np.abs(p - t).mean()),
        "mae_at_5pct": mae_at_top(p, t, 0.05),
        "k_at_1pct": float(k_at_x(p, t, 0.01)),
        "k_at_5pct": float(k_at_x(p, t, 0.05)),
    }


def aggregate_reports(reports: list[dict[str, float]]) -> dict[str, dict[str, float]]:
    """mean +- std (population) per field over repeated seeds."""
    if not reports:
        raise ValueError("no reports to aggregate")
    keys = reports[0].keys()
    out = {}
    for k in keys:
        vals = np.array([r[k] for r in reports], dtype=float)
        out[k] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


# --- Pareto ------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveVector:
    """Minimization objectives plus constraint status."""

    values: tuple[float, ...]
    feasible: bool = True
    violation: float = 0.0


def _as_vec(p) -> ObjectiveVector:
    if isinstance(p, ObjectiveVector):
        return p
    return ObjectiveVector(tuple(float(v) for v in p))


def dominates(a, b) -> bool:
    """Plain objective domination: a <= b everywhere, strict somewhere."""
    av, bv = _as_vec(a).values, _as_vec(b).values
    if len(av) != len(bv):
        raise ValueError("dimension mismatch")
    return all(x <= y for x, y in zip(av, bv)) and any(x < y for x, y in zip(av, bv))


def constrained_dominates(a, b) -> bool:
    """Constraint domination: feasible beats infeasible; among infeasible,
    lower violation wins; among feasible, plain domination."""
    a, b = _as_vec(a), _as_vec(b)
    if a.feasible and not b.feasible:
        return True
    if not a.feasible and b.feasible:
        return False
    if not a.feasible and not b.feasible:
        return a.violation < b.violation
    return dominates(a, b)


def pareto_front(points) -> list[int]:
    """Indices of constraint-non-dominated points, in input order.

    Duplicated objective vectors are mutually non-dominating, so all copies
    are kept.
    """
    vecs = [_as_vec(p) for p in points]
    if not vecs:
        return []
    dims = {len(v.values) for v in vecs}
    if len(dims) != 1:
        raise ValueError("points must share one dimensionality")
    feas = [i for i, v in enumerate(vecs) if v.feasible]
    if not feas:
        best = min(v.violation for v in vecs)
        return [i for i, v in enumerate(vecs) if v.violation == best]
    vals = np.array([vecs[i].values for i in feas], dtype=float)
    # vectorized all-pairs strict domination test
    le = (vals[:, None, :] <= vals[None, :, :]).all(axis=2)
    lt = (vals[:, None, :] < vals[None, :, :]).any(axis=2)
    dom = le & lt
    keep = ~dom.any(axis=0)
    return [feas[j] for j in range(len(feas)) if keep[j]]


def crowding_distance(values) -> np.ndarray:
    """NSGA-II crowding distance for one front of objective vectors (n, m).

    Boundary points get +inf per objective; interior points accumulate the
    normalized gap between their neighbours.  Objectives with zero or
    non-finite range contribute nothing.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2:
        raise ValueError("values must be a 2-D array of objective vectors")
    n, m = vals.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for j in range(m):
        order = np.argsort(vals[:, j], kind="stable")
        col = vals[order, j]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        lo, hi = col[0], col[-1]
        if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
            continue
        interior = order[1:-1]
        gaps = (col[2:] - col[:-2]) / (hi - lo)
        dist[interior] = dist[interior] + gaps
    return dist


def hypervolume_2d(points, ref) -> float:
    """Dominated area between a 2-D front and a reference point (minimization).

    Points that do not strictly dominate ref are excluded (a warning reports
    how many).  Duplicates and dominated members are harmless: the result is
    the area of the union of the boxes [f1, r1] x [f2, r2].
    """
    r1, r2 = float(ref[0]), float(ref[1])
    vals = []
    skipped = 0
    for p in points:
        v = _as_vec(p).values
        if len(v) != 2:
            raise ValueError("hypervolume_2d needs 2-D points")
        if v[0] < r1 and v[1] < r2:
            vals.append(v)
        else:
            skipped += 1
    if skipped:
        warnings.warn(f"hypervolume_2d: excluded {skipped} point(s) not dominating ref", stacklevel=2)
    if not vals:
        return 0.0
    vals.sort()
    hv = 0.0
    best2 = r2
    for f1, f2 in vals:
        if f2 < best2:
            hv += (r1 - f1) * (best2 - f2)
            best2 = f2
    return hv
