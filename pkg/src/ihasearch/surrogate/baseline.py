"""Flat MLP baseline over the concatenated padded token matrix.

Same featurization, normalizer, L1 objective and Adam recipe as the encoder;
the only difference is the architecture (two GELU hidden layers on the
flattened 360-dim input), so ranking comparisons isolate the encoder's
structural prior.
"""
from __future__ import annotations

import numpy as np

from .encoder import _gelu, _gelu_grad
from .features import FieldNormalizer, featurize_batch
from .training import AdamState, LabeledCorpus, TrainHistory, adam_step


class MlpBaseline:
    def __init__(self, params: dict[str, np.ndarray], normalizer: FieldNormalizer, max_layers: int, n_fields: int = 9):
        self.params = params
        self.normalizer = normalizer
        self.max_layers = max_layers
        self.n_fields = n_fields

    @classmethod
    def init(cls, normalizer, max_layers: int, hidden: int = 128, n_fields: int = 9, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        d_in = max_layers * n_fields
        params = {
            "w0": rng.normal(0.0, d_in ** -0.5, (d_in, hidden)),
            "b0": np.zeros(hidden),
            "w1": rng.normal(0.0, hidden ** -0.5, (hidden, hidden)),
            "b1": np.zeros(hidden),
            "w2": rng.normal(0.0, hidden ** -0.5, (hidden, 1)),
            "b2": np.zeros(1),
        }
        return cls(params, normalizer, max_layers, n_fields)

    def _flatten(self, toks: np.ndarray) -> np.ndarray:
        return toks.reshape(toks.shape[0], -1)

    def forward(self, x: np.ndarray, want_cache: bool = False):
        p = self.params
        u0 = x @ p["w0"] + p["b0"]
        a0 = _gelu(u0)
        u1 = a0 @ p["w1"] + p["b1"]
        a1 = _gelu(u1)
        y = (a1 @ p["w2"]).ravel() + p["b2"][0]
        if want_cache:
            return y, (x, u0, a0, u1, a1)
        return y

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        p = self.params
        y, (x, u0, a0, u1, a1) = self.forward(x, want_cache=True)
        resid = y - labels
        loss = float(np.abs(resid).mean())
        dy = np.sign(resid) / resid.shape[0]
        grads = {}
        grads["w2"] = a1.T @ dy[:, None]
        grads["b2"] = np.array([dy.sum()])
        da1 = dy[:, None] @ p["w2"].T
        du1 = da1 * _gelu_grad(u1)
        grads["w1"] = a0.T @ du1
        grads["b1"] = du1.sum(axis=0)
        da0 = du1 @ p["w1"].T
        du0 = da0 * _gelu_grad(u0)
        grads["w0"] = x.T @ du0
        grads["b0"] = du0.sum(axis=0)
        return loss, grads

    def predict_genomes(self, genomes) -> np.ndarray:
        toks, _ = featurize_batch(genomes, self.normalizer, self.max_layers)
        return self.forward(self._flatten(toks))


def train_mlp(
    corpus: LabeledCorpus,
    epochs: int = 200,
    batch_size: int = 32,
    lr: float = 1e-4,
    seed: int = 100,
    hidden: int = 128,
    max_layers: int = 40,
):
    """Same loop shape as the encoder's train(); returns (model, history)."""
    rng = np.random.default_rng(seed)
    normalizer = FieldNormalizer.fit([corpus.genomes[i] for i in corpus.train_idx])
    model = MlpBaseline.init(normalizer, max_layers, hidden=hidden, rng=rng)
    toks, _ = featurize_batch(corpus.genomes, normalizer, max_layers)
    x = model._flatten(toks)
    labels = corpus.labels

    def eval_l1(idx):
        if len(idx) == 0:
            return float("nan")
        return float(np.abs(model.forward(x[idx]) - labels[idx]).mean())

    history = TrainHistory()
    history.train_l1.append(eval_l1(corpus.train_idx))
    history.test_l1.append(eval_l1(corpus.test_idx))
    watch_test = len(corpus.test_idx) > 0
    best = history.test_l1[0] if watch_test else history.train_l1[0]
    best_params = {k: v.copy() for k, v in model.params.items()}

    state = AdamState.for_params(model.params)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(corpus.train_idx)
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            _, grads = model.loss_and_grads(x[idx], labels[idx])
            adam_step(model.params, grads, state, lr)
        history.train_l1.append(eval_l1(corpus.train_idx))
        history.test_l1.append(eval_l1(corpus.test_idx))
        score = history.test_l1[-1] if watch_test else history.train_l1[-1]
        if score < best:
            best = score
            history.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
    model.params = best_params
    return model, history
