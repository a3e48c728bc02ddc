"""Contiguous layer-to-stage packing for the ring backend.

greedy_contiguous_partition is the inner feasibility test: scan layers in
order, extending the open stage while the weight, KV and ops budgets all
hold.  balanced_contiguous_pack binary-searches the scalar per-stage ops
budget for the smallest feasible value, which minimizes the longest-stage
decode time (the token-pipeline bottleneck).

The greedy scan produces the minimum possible number of contiguous stages
for a given budget (all constraints are additive and monotone), so capping
the stage count at the ring's maximum depth keeps the binary search exact.
"""
from dataclasses import dataclass

from .profiles import LayerProfile


@dataclass(frozen=True)
class StageLimits:
    """Per-stage capacity of one chip: weight memory, KV cache, scratchpad
    bytes, and the KV context length the cache must hold."""

    weight_cap: float
    kv_cap: float
    act_cap: float
    ctx_tokens: float


def greedy_contiguous_partition(
    profiles: list[LayerProfile],
    limits: StageLimits,
    ops_budget: float,
) -> list[list[int]] | None:
    """Contiguous partition with every stage within limits and ops_budget,
    or None if some single layer alone exceeds the chip."""
    if not profiles:
        raise ValueError("profiles must be non-empty")
    stages: list[list[int]] = []
    current: list[int] = []
    w = k = o = 0.0
    for i, prof in enumerate(profiles):
        dk = prof.kv_bytes_per_token * limits.ctx_tokens
        if (
            prof.weight_bytes > limits.weight_cap
            or dk > limits.kv_cap
            or prof.decode_ops > ops_budget
            or prof.act_bytes > limits.act_cap
        ):
            return None
        if (
            w + prof.weight_bytes <= limits.weight_cap
            and k + dk <= limits.kv_cap
            and o + prof.decode_ops <= ops_budget
        ):
            current.append(i)
            w, k, o = w + prof.weight_bytes, k + dk, o + prof.decode_ops
        else:
            stages.append(current)
            current = [i]
            w, k, o = prof.weight_bytes, dk, prof.decode_ops
    if current:
        stages.append(current)
    return stages


def balanced_contiguous_pack(
    profiles: list[LayerProfile],
    limits: StageLimits,
    n_chips_max: int,
) -> list[list[int]] | None:
    """Partition minimizing the bottleneck stage ops, or None if infeasible.

    Binary search over the integer ops budget B in [max ops, sum ops]; a
    budget is feasible when the greedy partition exists and fits in
    n_chips_max stages.  Because the greedy scan minimizes the stage count,
    feasibility is monotone in B and the search is exact.
    """
    if not profiles:
        raise ValueError("profiles must be non-empty")
    if n_chips_max < 1:
        raise ValueError("n_chips_max must be >= 1")
    for prof in profiles:
        if (
            prof.weight_bytes > limits.weight_cap
            or prof.kv_bytes_per_token * limits.ctx_tokens > limits.kv_cap
            or prof.act_bytes > limits.act_cap
        ):
            return None
    lo = max(p.decode_ops for p in profiles)
    hi = sum(p.decode_ops for p in profiles)
    best = None
    while lo <= hi:
        budget = (lo + hi) // 2
        part = greedy_contiguous_partition(profiles, limits, budget)
        if part is not None and len(part) <= n_chips_max:
            best = part
            hi = budget - 1
        else:
            lo = budget + 1
    return best


def stage_totals(profiles: list[LayerProfile], stage: list[int], ctx_tokens: float):
    """(weight bytes, KV bytes at ctx, decode ops, peak act bytes) of one stage."""
    w = sum(profiles[i].weight_bytes for i in stage)
    k = sum(profiles[i].kv_bytes_per_token for i in stage) * ctx_tokens
    o = sum(profiles[i].decode_ops for i in stage)
    a = max(profiles[i].act_bytes for i in stage)
    return w, k, o, a


def bottleneck_ops(profiles: list[LayerProfile], partition: list[list[int]]) -> float:
    """Largest per-stage decode-ops total: the pipeline bottleneck."""
    return max(sum(profiles[i].decode_ops for i in stage) for stage in partition)
