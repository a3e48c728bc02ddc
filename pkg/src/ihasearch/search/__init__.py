"""Constrained multi-objective architecture search (NSGA-II) with optional
surrogate co-evolution and pluggable hardware backends."""
from .config import MutationRates, SearchConfig, ring_preset, surrogate_preset
from .engine import (
    Individual,
    ParetoArchive,
    SearchResult,
    ablation_suite,
    make_backend,
    run_search,
)
from .nsga import fast_nondominated_sort, nsga_survival
from .operators import crossover, gqa_repair, mutate, tournament_select

__all__ = [
    "MutationRates",
    "SearchConfig",
    "surrogate_preset",
    "ring_preset",
    "Individual",
    "ParetoArchive",
    "SearchResult",
    "run_search",
    "ablation_suite",
    "make_backend",
    "fast_nondominated_sort",
    "nsga_survival",
    "tournament_select",
    "crossover",
    "mutate",
    "gqa_repair",
]
