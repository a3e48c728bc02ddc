"""Hardware-cost backends: analytical substrate roofline and ring-dataflow co-search.

Both backends share one interface: cost(genome, workload) -> (energy per
token [J], TTFT [s], TPOT [s]).
"""
from .profiles import LayerProfile, Workload, profile_layer, profile_model
from .substrate import (
    SubstrateSpec,
    builtin_substrate_names,
    load_substrate,
    substrate_cost,
)
from .packing import (
    StageLimits,
    balanced_contiguous_pack,
    greedy_contiguous_partition,
)
from .ring import (
    ChipTemplate,
    RingPlan,
    RingResult,
    build_chip,
    chip_grid_search,
    default_chip_grid,
    ring_cost,
    ring_simulate,
    write_plan_csv,
)

__all__ = [
    "LayerProfile",
    "Workload",
    "profile_layer",
    "profile_model",
    "SubstrateSpec",
    "builtin_substrate_names",
    "load_substrate",
    "substrate_cost",
    "StageLimits",
    "greedy_contiguous_partition",
    "balanced_contiguous_pack",
    "ChipTemplate",
    "RingPlan",
    "RingResult",
    "build_chip",
    "default_chip_grid",
    "chip_grid_search",
    "ring_cost",
    "ring_simulate",
    "write_plan_csv",
]
