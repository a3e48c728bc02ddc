"""One constrained multi-objective search run, end to end.

NSGA-II over genomes: binary tournaments on constraint-dominance, one-point
crossover, four structural mutations (delete, duplicate, rotate/reflect,
perturb) with repair, elitist survival by front rank and crowding distance,
and an all-time archive of feasible non-dominated architectures.  Quality
comes from the synthetic oracle; hardware metrics from the analytic
weight-stationary backend.  Scaled to finish in a few seconds.

Run:  python demos/05_search.py
"""
from ihasearch.search import SearchConfig, run_search


def main() -> None:
    config = SearchConfig(
        population_size=16,
        offspring_size=32,
        generations=10,
        refine_every_generations=0,   # oracle labels need no surrogate refits
        evaluator="oracle",
        backend="analytic:gemmini",
        val_loss_max=3.8,
        seed=42,
    )
    print(f"population {config.population_size}, offspring {config.offspring_size}, "
          f"{config.generations} generations, backend {config.backend}")

    result = run_search(config)

    print("\n gen   best-loss   feasible   archive   hypervolume")
    for row in result.stats:
        print(f"  {row['generation']:2d}   {row['best_val_loss']:9.4f}   "
              f"{row['n_feasible_pop']:8d}   {row['archive_size']:7d}   "
              f"{row['hypervolume']:.4g}")

    print(f"\ntotal evaluations: {result.n_evaluations}")
    print(f"hypervolume reference point: ({result.hv_ref[0]:.4g}, "
          f"{result.hv_ref[1]:.4g}) in (val-loss, body-params)")

    print("\n== final archive: the quality/cost trade-off menu ==")
    print(" genome-id      val-loss     e_tok[uJ]   ttft[ms]   tpot[us]  layers")
    members = sorted(result.archive.members, key=lambda i: i.val_loss)
    for ind in members[:10]:
        active = sum(l.mask for l in ind.genome.layers)
        print(f" {ind.gid}   {ind.val_loss:.4f}   {ind.e_tok_j * 1e6:9.2f}  "
              f"{ind.ttft_s * 1e3:9.2f}  {ind.tpot_s * 1e6:9.2f}  {active:5d}")
    if len(members) > 10:
        print(f" ... and {len(members) - 10} more")
    print("\nno single winner: the cheapest-to-run members trade away quality,")
    print("which is exactly what the archive is for.")


if __name__ == "__main__":
    main()
