"""NSGA-II generation loop with a pluggable quality evaluator, pluggable
hardware backend, optional surrogate co-evolution, and the ablation suite."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..genome import (
    ArchGenome,
    GlobalConfig,
    SpaceRanges,
    count_params,
    genome_id,
    random_genome,
    repair,
    validate,
)
from ..hwcost import RingResult, Workload, load_substrate, ring_cost, substrate_cost
from ..metrics import ObjectiveVector, hypervolume_2d, pareto_front
from ..surrogate import EncoderSurrogate, LabeledCorpus, fine_tune, synth_oracle
from .config import SearchConfig
from .nsga import fast_nondominated_sort, nsga_survival, rank_and_crowd
from .operators import crossover, gqa_repair, mutate, tournament_select

OBJECTIVE_NAMES = ("val_loss", "e_tok_j", "ttft_s", "tpot_s")


@dataclass(frozen=True)
class Individual:
    """One evaluated architecture: genome, the four minimization objectives,
    and its constraint status."""

    genome: ArchGenome
    gid: str
    val_loss: float
    e_tok_j: float
    ttft_s: float
    tpot_s: float
    feasible: bool
    violation: float
    born_gen: int
    ring: RingResult | None = None

    @property
    def objectives(self) -> tuple[float, float, float, float]:
        return (self.val_loss, self.e_tok_j, self.ttft_s, self.tpot_s)

    def objective_vector(self) -> ObjectiveVector:
        return ObjectiveVector(self.objectives, self.feasible, self.violation)


class ParetoArchive:
    """All-time non-dominated set of feasible evaluated individuals.

    Individuals are deduplicated by genome id (the first evaluation of a
    genome is the one that counts, so later surrogate refits cannot rewrite
    history).  Membership is filtered by plain objective domination; ties
    and duplicate objective vectors are kept.
    """

    def __init__(self) -> None:
        self._members: list[Individual] = []
        self._ids: set[str] = set()

    def update(self, individuals: Sequence[Individual]) -> None:
        fresh = []
        for ind in individuals:
            if ind.feasible and ind.gid not in self._ids:
                fresh.append(ind)
                self._ids.add(ind.gid)
        if not fresh:
            return
        combined = self._members + fresh
        keep = pareto_front([ObjectiveVector(ind.objectives) for ind in combined])
        self._members = [combined[i] for i in sorted(keep)]

    @property
    def members(self) -> list[Individual]:
        return list(self._members)

    def __len__(self) -> int:
        return len(self._members)

    def objectives_array(self) -> np.ndarray:
        return np.array([ind.objectives for ind in self._members], dtype=float).reshape(
            len(self._members), len(OBJECTIVE_NAMES)
        )

    def quality_size_points(self) -> np.ndarray:
        """(val_loss, weight-parameter count) pairs for hypervolume tracking.

        Model size counts transformer-body weights only (vocab_size=0): the
        search never varies the embedding table, so including it would only
        shift every point by the same constant.
        """
        pts = [
            (ind.val_loss, float(count_params(ind.genome, vocab_size=0)))
            for ind in self._members
        ]
        return np.array(pts, dtype=float).reshape(len(pts), 2)


@dataclass
class SearchResult:
    """Everything a search run produced, in evaluation order where relevant.

    ``evaluated`` lists every individual in the order it was scored (initial
    population first, then each generation's offspring), which is what the
    archive-correctness and audit checks consume."""

    config: SearchConfig
    population: list[Individual]
    archive: ParetoArchive
    stats: list[dict]
    events: list[dict]
    archive_snapshots: list[np.ndarray]
    hv_ref: tuple[float, float]
    n_evaluations: int
    evaluated: list[Individual] = field(default_factory=list, repr=False)

    def hv_curve(self, ref: tuple[float, float] | None = None) -> np.ndarray:
        """Archive hypervolume in (val_loss, model size) per generation."""
        r = self.hv_ref if ref is None else ref
        return np.array(
            [hypervolume_2d(snap, r) if len(snap) else 0.0 for snap in self.archive_snapshots]
        )


def default_hv_ref(snapshot_groups: Sequence[Sequence[np.ndarray]]) -> tuple[float, float]:
    """Componentwise worst over the union of all snapshot points, scaled by
    1.1, so every point strictly dominates the reference.  Multiplying a
    non-positive worst value by 1.1 would move the reference the wrong way,
    so those components are padded additively instead."""
    pts = [s for group in snapshot_groups for s in group if len(s)]
    if not pts:
        return (1.0, 1.0)
    worst = np.concatenate(pts, axis=0).max(axis=0)
    ref = np.where(worst > 0, worst * 1.1, worst + 0.1 * np.maximum(np.abs(worst), 1.0))
    return (float(ref[0]), float(ref[1]))


def make_backend(
    config: SearchConfig,
) -> Callable[[ArchGenome], tuple[tuple[float, float, float] | None, RingResult | None]]:
    """Build the hardware-cost callable for a config.

    Returns a function mapping genome -> ((e_tok_j, ttft_s, tpot_s), ring)
    where the cost tuple is None when the backend cannot realize the genome
    (e.g. no feasible ring plan exists).
    """
    workload = Workload(config.prefill_tokens, config.decode_tokens)
    if config.backend == "ring":

        def ring_backend(genome: ArchGenome):
            out = ring_cost(genome, workload)
            if out is None:
                return None, None
            cost, result = out
            return (cost.e_tok_j, cost.ttft_s, cost.tpot_s), result

        return ring_backend

    spec = load_substrate(config.backend.split(":", 1)[1])

    def analytic_backend(genome: ArchGenome):
        cost = substrate_cost(genome, spec, workload)
        return (cost.e_tok_j, cost.ttft_s, cost.tpot_s), None

    return analytic_backend


def acquisition_select(
    pop: Sequence[Individual],
    surrogate: EncoderSurrogate,
    b: int,
    n_mc: int,
    rng: np.random.Generator,
) -> list[ArchGenome]:
    """Pick the refinement batch: up to floor(b/2) first-front members with
    the lowest predicted loss (exploitation), topped up with the
    highest-uncertainty members of the rest (exploration)."""
    genomes = [ind.genome for ind in pop]
    mu, sigma = surrogate.mc_predict_genomes(genomes, n_mc=n_mc, seed=int(rng.integers(2**31)))
    first = fast_nondominated_sort(pop)[0]
    exploit_idx, explore_idx = acquisition_indices(len(pop), first, mu, sigma, b)
    return [pop[i].genome for i in exploit_idx + explore_idx]


def acquisition_indices(
    n: int, first_front: Sequence[int], mu: np.ndarray, sigma: np.ndarray, b: int
) -> tuple[list[int], list[int]]:
    """Index-level acquisition split; ties broken by ascending index."""
    front = sorted(first_front)
    rest = [i for i in range(n) if i not in set(front)]
    b_exp = min(b // 2, len(front))
    exploit = sorted(front, key=lambda i: (mu[i], i))[:b_exp]
    explore = sorted(rest, key=lambda i: (-sigma[i], i))[: min(b - b_exp, len(rest))]
    return exploit, explore


class _SearchEngine:
    def __init__(
        self,
        config: SearchConfig,
        surrogate: EncoderSurrogate | None,
        corpus: LabeledCorpus | None,
        ranges: SpaceRanges | None,
        global_cfg: GlobalConfig | None,
        oracle_fn: Callable[[ArchGenome], float] | None,
    ) -> None:
        self.cfg = config
        self.ranges = ranges or SpaceRanges()
        self.global_cfg = global_cfg or GlobalConfig()
        self.oracle_fn = oracle_fn or functools.partial(synth_oracle, noise_seed=config.seed)
        self.backend = make_backend(config)
        self.rng = np.random.default_rng(config.seed)
        self.corpus = corpus
        if config.evaluator == "surrogate":
            if surrogate is None or surrogate.normalizer is None:
                raise ValueError("evaluator='surrogate' needs a trained surrogate")
            self.baseline = surrogate
            self.model: EncoderSurrogate | None = surrogate
        else:
            self.baseline = None
            self.model = None
        if config.refine_every_generations > 0 and corpus is None:
            raise ValueError("refinement events need the original training corpus for replay")
        if config.space == "gqa":
            self.repair_fn = lambda g: gqa_repair(g, self.ranges)
        else:
            self.repair_fn = lambda g: repair(g, self.ranges)
        self.n_evaluations = 0
        self.evaluated: list[Individual] = []

    # -- evaluation ------------------------------------------------------
    def _quality(self, genomes: list[ArchGenome]) -> np.ndarray:
        if self.cfg.evaluator == "surrogate":
            return np.asarray(self.model.predict_genomes(genomes), dtype=float)
        return np.array([self.oracle_fn(g) for g in genomes], dtype=float)

    def evaluate(self, genomes: list[ArchGenome], gen: int) -> list[Individual]:
        for g in genomes:
            problems = validate(g, self.ranges)
            if problems:
                raise AssertionError(f"operator emitted an invalid genome: {problems}")
        quality = self._quality(genomes)
        out = []
        for g, v in zip(genomes, quality):
            cost, ring = self.backend(g)
            v = float(v)
            if cost is None or not np.isfinite(v):
                e = ttft = tpot = float("inf")
                feasible, viol = False, float("inf")
            else:
                e, ttft, tpot = cost
                feasible = v < self.cfg.val_loss_max and np.isfinite([e, ttft, tpot]).all()
                viol = max(0.0, v - self.cfg.val_loss_max) if np.isfinite(v) else float("inf")
            out.append(
                Individual(
                    genome=g,
                    gid=genome_id(g),
                    val_loss=v,
                    e_tok_j=float(e),
                    ttft_s=float(ttft),
                    tpot_s=float(tpot),
                    feasible=bool(feasible),
                    violation=float(viol),
                    born_gen=gen,
                    ring=ring,
                )
            )
        self.n_evaluations += len(out)
        self.evaluated.extend(out)
        return out

    # -- variation -------------------------------------------------------
    def breed(self, population: list[Individual]) -> list[ArchGenome]:
        cfg = self.cfg
        if cfg.variation == "random":
            raw = [
                random_genome(self.ranges, self.rng, self.global_cfg)
                for _ in range(cfg.offspring_size)
            ]
            return [self.repair_fn(g) for g in raw]
        vectors = [ind.objective_vector() for ind in population]
        _, crowd, _ = rank_and_crowd(vectors)
        pool_idx = tournament_select(vectors, crowd, self.rng, cfg.population_size)
        pool = [population[i] for i in pool_idx]
        offspring = []
        while len(offspring) < cfg.offspring_size:
            p1 = pool[int(self.rng.integers(len(pool)))]
            p2 = pool[int(self.rng.integers(len(pool)))]
            if self.rng.random() < cfg.crossover_rate:
                child = crossover(p1.genome, p2.genome, self.rng, self.repair_fn)
            else:
                child = p1.genome
            if self.rng.random() < cfg.mutation_rate:
                child = mutate(child, self.rng, cfg.mutation_rates, self.ranges, self.repair_fn)
            offspring.append(self.repair_fn(child))
        return offspring

    # -- refinement ------------------------------------------------------
    def refine(self, population: list[Individual], t: int, buffer: dict) -> dict:
        cfg = self.cfg
        genomes = [ind.genome for ind in population]
        mu, sigma = self.model.mc_predict_genomes(
            genomes, n_mc=cfg.mc_dropout_passes, seed=int(self.rng.integers(2**31))
        )
        first = fast_nondominated_sort(population)[0]
        exploit_idx, explore_idx = acquisition_indices(
            len(population), first, mu, sigma, cfg.refine_batch_size
        )
        selected = exploit_idx + explore_idx
        labels = [float(self.oracle_fn(population[i].genome)) for i in selected]
        n_dropped = 0
        for i, y in zip(selected, labels):
            ind = population[i]
            if not np.isfinite(y):
                n_dropped += 1
                continue
            if ind.gid not in buffer["ids"]:
                buffer["ids"].add(ind.gid)
                buffer["genomes"].append(ind.genome)
                buffer["labels"].append(y)
        event = {
            "t": t,
            "exploit_ids": [population[i].gid for i in exploit_idx],
            "explore_ids": [population[i].gid for i in explore_idx],
            "labels": labels,
            "n_dropped": n_dropped,
            "buffer_size": len(buffer["genomes"]),
        }
        if buffer["genomes"]:
            self.model = fine_tune(
                self.baseline,
                buffer["genomes"],
                np.array(buffer["labels"], dtype=float),
                self.corpus,
                replay_ratio=cfg.replay_ratio,
                seed=int(self.rng.integers(2**31)),
            )
        return event

    # -- main loop -------------------------------------------------------
    def run(self) -> SearchResult:
        cfg = self.cfg
        init = [
            self.repair_fn(random_genome(self.ranges, self.rng, self.global_cfg))
            for _ in range(cfg.population_size)
        ]
        population = self.evaluate(init, gen=0)
        archive = ParetoArchive()
        buffer: dict = {"genomes": [], "labels": [], "ids": set()}
        stats: list[dict] = []
        events: list[dict] = []
        snapshots: list[np.ndarray] = []

        for t in range(cfg.generations):
            offspring = self.breed(population)
            evaluated = self.evaluate(offspring, gen=t + 1)
            combined = population + evaluated
            keep = nsga_survival([ind.objective_vector() for ind in combined], cfg.population_size)
            population = [combined[i] for i in keep]
            archive.update(combined)
            if (
                cfg.refine_every_generations > 0
                and t > 0
                and t % cfg.refine_every_generations == 0
            ):
                events.append(self.refine(population, t, buffer))
            snapshots.append(archive.quality_size_points())
            stats.append(
                {
                    "generation": t,
                    "n_evaluations": self.n_evaluations,
                    "n_feasible_pop": sum(ind.feasible for ind in population),
                    "best_val_loss": min(
                        (ind.val_loss for ind in archive.members), default=float("inf")
                    ),
                    "archive_size": len(archive),
                    "hypervolume": 0.0,
                }
            )

        hv_ref = default_hv_ref([snapshots])
        for row, snap in zip(stats, snapshots):
            row["hypervolume"] = float(hypervolume_2d(snap, hv_ref)) if len(snap) else 0.0
        return SearchResult(
            config=cfg,
            population=population,
            archive=archive,
            stats=stats,
            events=events,
            archive_snapshots=snapshots,
            hv_ref=hv_ref,
            n_evaluations=self.n_evaluations,
            evaluated=self.evaluated,
        )


def run_search(
    config: SearchConfig,
    surrogate: EncoderSurrogate | None = None,
    corpus: LabeledCorpus | None = None,
    ranges: SpaceRanges | None = None,
    global_cfg: GlobalConfig | None = None,
    oracle_fn: Callable[[ArchGenome], float] | None = None,
) -> SearchResult:
    """Run the full generation loop and return population, archive, stats,
    and the refinement-event log.  Deterministic given the config seed."""
    return _SearchEngine(config, surrogate, corpus, ranges, global_cfg, oracle_fn).run()


ABLATION_RECIPES = ("nsga_iha", "random_iha", "nsga_gqa")


def _recipe_config(base: SearchConfig, recipe: str, seed: int) -> SearchConfig:
    if recipe == "nsga_iha":
        return replace(base, seed=seed, variation="nsga", space="iha")
    if recipe == "random_iha":
        return replace(base, seed=seed, variation="random", space="iha")
    if recipe == "nsga_gqa":
        return replace(base, seed=seed, variation="nsga", space="gqa")
    raise ValueError(f"unknown recipe {recipe!r}; choose from {ABLATION_RECIPES}")


@dataclass
class AblationResult:
    """Hypervolume-vs-generation curves for each recipe under one shared
    reference point (componentwise worst over every run, x1.1)."""

    ref: tuple[float, float]
    curves: dict[str, np.ndarray]
    results: dict[str, list[SearchResult]] = field(repr=False, default_factory=dict)

    def summary(self) -> dict[str, dict[str, np.ndarray]]:
        return {
            name: {"mean": arr.mean(axis=0), "std": arr.std(axis=0)}
            for name, arr in self.curves.items()
        }

    def median_final(self) -> dict[str, float]:
        return {name: float(np.median(arr[:, -1])) for name, arr in self.curves.items()}


def ablation_suite(
    base_config: SearchConfig,
    seeds: Sequence[int],
    recipes: Sequence[str] = ABLATION_RECIPES,
    ranges: SpaceRanges | None = None,
    global_cfg: GlobalConfig | None = None,
    oracle_fn: Callable[[ArchGenome], float] | None = None,
) -> AblationResult:
    """Run each recipe over the given seeds and score every run's archive
    trajectory against one shared hypervolume reference point."""
    if len(seeds) < 2:
        raise ValueError("ablation needs at least two seeds")
    if base_config.evaluator != "oracle":
        raise ValueError("ablation runs score candidates with the synthetic oracle")
    results: dict[str, list[SearchResult]] = {}
    for recipe in recipes:
        results[recipe] = [
            run_search(
                _recipe_config(base_config, recipe, seed),
                ranges=ranges,
                global_cfg=global_cfg,
                oracle_fn=oracle_fn,
            )
            for seed in seeds
        ]
    ref = default_hv_ref(
        [res.archive_snapshots for runs in results.values() for res in runs]
    )
    curves = {
        recipe: np.stack([res.hv_curve(ref) for res in runs])
        for recipe, runs in results.items()
    }
    return AblationResult(ref=ref, curves=curves, results=results)
