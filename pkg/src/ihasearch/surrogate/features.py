"""Genome -> padded token matrix for the surrogate.

Active layers are packed in depth order, one 9-field token each: the five
shape fields, the two gate bits, then the two broadcast globals (d_model and
context length).  Rows past the active count are zero padding flagged by the
mask vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..genome import ArchGenome

FIELD_ORDER = ("n_h", "n_kv", "d_qk", "d_v", "d_mlp", "mask", "attn", "d_model", "block_size")
N_FIELDS = len(FIELD_ORDER)


def raw_tokens(genome: ArchGenome) -> np.ndarray:
    """(L_active, 9) raw field values of the active layers, in order."""
    g = genome.global_cfg
    rows = [
        (gene.n_h, gene.n_kv, gene.d_qk, gene.d_v, gene.d_mlp, gene.mask, gene.attn, g.d_model, g.block_size)
        for gene in genome.layers
        if gene.mask == 1
    ]
    return np.array(rows, dtype=float).reshape(len(rows), N_FIELDS)


@dataclass
class FieldNormalizer:
    """Min-max scaling per field; degenerate fields map to 0."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, genomes) -> "FieldNormalizer":
        stacked = np.concatenate([raw_tokens(g) for g in genomes], axis=0)
        if stacked.shape[0] == 0:
            raise ValueError("cannot fit a normalizer on zero active layers")
        return cls(lo=stacked.min(axis=0), hi=stacked.max(axis=0))

    def transform(self, tokens: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        out = (tokens - self.lo) / safe
        return np.where(span > 0, out, 0.0)


def featurize(genome: ArchGenome, normalizer: FieldNormalizer | None = None, max_layers: int | None = None):
    """Return (tokens, mask): a (max_layers, 9) matrix and its validity row mask.

    With a normalizer the real rows are min-max scaled; padding rows stay
    all-zero either way.
    """
    L = max_layers if max_layers is not None else genome.global_cfg.max_layers
    rows = raw_tokens(genome)
    if rows.shape[0] > L:
        raise ValueError(f"{rows.shape[0]} active layers exceed the {L}-token budget")
    if normalizer is not None:
        rows = normalizer.transform(rows)
    tokens = np.zeros((L, N_FIELDS))
    tokens[: rows.shape[0]] = rows
    mask = np.zeros(L)
    mask[: rows.shape[0]] = 1.0
    return tokens, mask


def featurize_batch(genomes, normalizer: FieldNormalizer | None = None, max_layers: int | None = None):
    toks, masks = zip(*(featurize(g, normalizer, max_layers) for g in genomes))
    return np.stack(toks), np.stack(masks)
