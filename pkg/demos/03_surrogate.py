"""Training the encoder surrogate and reading its ranking diagnostics.

The surrogate is a small transformer encoder, written directly in numpy with
a hand-derived backward pass.  It ingests an architecture as a packed
sequence of per-layer feature tokens and predicts validation loss.  Labels
here come from the synthetic oracle (a smooth function of architecture shape
plus seeded noise), so the whole pipeline runs on a laptop in seconds; what
transfers to real labels is the machinery, not the numbers.

Run:  python demos/03_surrogate.py   (~30 s: trains a reduced encoder)
"""
import numpy as np

from ihasearch.metrics import rank_report
from ihasearch.surrogate import (
    EncoderConfig,
    EncoderSurrogate,
    make_synthetic_corpus,
    split_corpus,
    train,
)


def main() -> None:
    print("== the full-size encoder, for reference ==")
    full = EncoderSurrogate.init(seed=0)
    print(f"default configuration: {full.param_count():,} trainable scalars")

    print("\n== corpus: 160 architectures labeled by the synthetic oracle ==")
    genomes, labels = make_synthetic_corpus(160, seed=7)
    corpus = split_corpus(genomes, labels, test_frac=0.2, seed=0)
    print(f"train/test split: {len(corpus.train_idx)}/{len(corpus.test_idx)}, "
          f"label range {labels.min():.3f} .. {labels.max():.3f}")

    print("\n== train a reduced encoder (d_enc=32, 2 blocks) ==")
    cfg = EncoderConfig(d_enc=32, n_blocks=2, n_heads=2, ffn_mult=2,
                        p_drop=0.2, max_layers=40)
    model, history = train(corpus, cfg, epochs=60, batch_size=32,
                           lr=3e-4, seed=100)
    print(f"parameters: {model.param_count():,}")
    for epoch in (0, 10, 20, 40, history.best_epoch):
        print(f"  epoch {epoch:3d}: train L1 {history.train_l1[epoch]:.4f}   "
              f"test L1 {history.test_l1[epoch]:.4f}")
    print(f"best checkpoint: epoch {history.best_epoch}")

    print("\n== held-out ranking quality ==")
    test_genomes = [corpus.genomes[i] for i in corpus.test_idx]
    truth = corpus.labels[corpus.test_idx]
    pred = model.predict_genomes(test_genomes)
    for key, value in sorted(rank_report(pred, truth).items()):
        print(f"  {key:12s}: {value:.4f}")

    print("\n== uncertainty from MC dropout ==")
    mu, sigma = model.mc_predict_genomes(test_genomes[:5], n_mc=10, seed=0)
    print("  truth   mean-pred  spread")
    for t, m, s in zip(truth[:5], mu, sigma):
        print(f"  {t:.4f}  {m:9.4f}  +/-{s:.4f}")
    print("the search loop uses mu to exploit and sigma to explore when it")
    print("picks which candidates deserve a real label.")


if __name__ == "__main__":
    main()
