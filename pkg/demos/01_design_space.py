"""Tour of the architecture design space: genes, validation, repair, counting.

The search individual is an ArchGenome: a global configuration (embedding
width, context length, layer-slot budget) plus one LayerGene per slot.  Each
gene decouples what classic grouped-query attention ties together — head
count, KV-group count, query/key width, and value width vary independently,
constrained only by n_kv | n_h.  This script walks the basic plumbing every
other component builds on.

Run:  python demos/01_design_space.py
"""
import numpy as np

from ihasearch.genome import (
    ArchGenome,
    GlobalConfig,
    LayerGene,
    count_attention_configs,
    count_params,
    genome_id,
    random_genome,
    repair,
    to_json,
    validate,
)


def main() -> None:
    print("== one hand-built genome ==")
    gene = LayerGene(mask=1, attn=1, n_h=9, n_kv=3, d_qk=64, d_v=96, d_mlp=1536)
    g = ArchGenome(GlobalConfig(d_model=768, block_size=1024, max_layers=4),
                   (gene, gene, LayerGene(1, 0, 4, 4, 64, 64, 1024), gene))
    print(f"id        : {genome_id(g)}")
    print(f"valid     : {not validate(g)}")
    print(f"params    : {count_params(g):,} (with tied 50,257-token embedding)")
    print(f"body only : {count_params(g, vocab_size=0):,}")
    print(f"document  : {to_json(g)[:100]}...")

    print("\n== an invalid genome and its repair ==")
    bad_gene = LayerGene(mask=1, attn=1, n_h=5, n_kv=3, d_qk=77, d_v=96, d_mlp=1536)
    bad = ArchGenome(g.global_cfg, (bad_gene,) + g.layers[1:])
    for violation in validate(bad):
        print(f"violation : {violation}")
    fixed = repair(bad)
    print(f"repaired  : n_h={fixed.layers[0].n_h} n_kv={fixed.layers[0].n_kv} "
          f"d_qk={fixed.layers[0].d_qk} -> valid={not validate(fixed)}")

    print("\n== how much bigger is the decoupled space? ==")
    gqa = count_attention_configs("gqa", d_model=768)
    iha = count_attention_configs("iha", d_model=768)
    print(f"per-layer attention shapes, width-768 model:")
    print(f"  grouped-query (tied dims) : {gqa}")
    print(f"  decoupled                 : {iha:,}")
    print(f"  expansion                 : {iha / gqa:.1f}x  per layer")

    print("\n== random genomes are always valid ==")
    rng = np.random.default_rng(0)
    sizes = []
    for _ in range(5):
        r = random_genome(rng=rng)
        assert not validate(r)
        active = sum(l.mask for l in r.layers)
        sizes.append(count_params(r))
        print(f"  {genome_id(r)}  active layers {active:2d}  "
              f"params {count_params(r):>13,}")
    print(f"size spread over 5 draws: {min(sizes):,} .. {max(sizes):,}")


if __name__ == "__main__":
    main()
