"""From-scratch transformer-encoder regressor (numpy, hand-written gradients).

Architecture: nine per-field scalar lifts into d_enc plus a learned positional
table, four pre-LN blocks (multi-head self-attention over packed layer tokens,
GELU feed-forward), masked mean pooling and a scalar head.  Padding tokens are
invisible: their key columns are masked out of every attention row and the
pool averages active rows only.  Dropout (training and MC inference) hits the
attention probability matrices and the feed-forward outputs, nothing else.

Everything runs in float64; backward passes are exact analytic gradients of
the mean-L1 objective (verified against central finite differences in the
test suite).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from .features import FIELD_ORDER, FieldNormalizer, N_FIELDS

_LN_EPS = 1e-5
_NEG = -1e30  # additive key-mask bias; exact -inf breaks (0 * -inf) in backward paths


@dataclass(frozen=True)
class EncoderConfig:
    n_fields: int = N_FIELDS
    d_enc: int = 64
    n_blocks: int = 4
    n_heads: int = 4
    ffn_mult: int = 4
    p_drop: float = 0.2
    max_layers: int = 40

    @property
    def d_head(self) -> int:
        return self.d_enc // self.n_heads

    @property
    def d_ffn(self) -> int:
        return self.ffn_mult * self.d_enc


def _gelu_cdf(u: np.ndarray) -> np.ndarray:
    """Standard normal CDF (exact erf form)."""
    return 0.5 * (1.0 + erf(u / np.sqrt(2.0)))


def _gelu(u: np.ndarray) -> np.ndarray:
    return u * _gelu_cdf(u)


def _gelu_grad(u: np.ndarray, cdf: np.ndarray | None = None) -> np.ndarray:
    if cdf is None:
        cdf = _gelu_cdf(u)
    phi = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    return cdf + u * phi


def _contract(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """(B,L,d) x (B,L,e) -> (d,e) weight-gradient contraction as one dgemm."""
    return x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv)

def _layer_norm_backward(dy: np.ndarray, cache, g: np.ndarray):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def init_params(config: EncoderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    d, f = config.d_enc, config.d_ffn
    p: dict[str, np.ndarray] = {}
    p["lift_w"] = rng.normal(0.0, 0.5, (config.n_fields, d))
    p["lift_b"] = np.zeros((config.n_fields, d))
    p["pos"] = rng.normal(0.0, 0.5, (config.max_layers, d))
    for i in range(config.n_blocks):
        pre = f"b{i}."
        p[pre + "ln1_g"] = np.ones(d)
        p[pre + "ln1_b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            p[pre + name] = rng.normal(0.0, d ** -0.5, (d, d))
        for name in ("bq", "bk", "bv", "bo"):
            p[pre + name] = np.zeros(d)
        p[pre + "ln2_g"] = np.ones(d)
        p[pre + "ln2_b"] = np.zeros(d)
        p[pre + "w1"] = rng.normal(0.0, d ** -0.5, (d, f))
        p[pre + "b1"] = np.zeros(f)
        p[pre + "w2"] = rng.normal(0.0, f ** -0.5, (f, d))
        p[pre + "b2"] = np.zeros(d)
    p["head_w"] = rng.normal(0.0, d ** -0.5, d)
    p["head_b"] = np.zeros(1)
    return p


class EncoderSurrogate:
    """Bundles config, parameters and the fitted field normalizer."""

    def __init__(self, config: EncoderConfig, params: dict[str, np.ndarray], normalizer: FieldNormalizer | None = None):
        self.config = config
        self.params = params
        self.normalizer = normalizer

    @classmethod
    def init(cls, config: EncoderConfig | None = None, seed: int = 0) -> "EncoderSurrogate":
        config = config or EncoderConfig()
        return cls(config, init_params(config, np.random.default_rng(seed)))

    def param_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "EncoderSurrogate":
        norm = None
        if self.normalizer is not None:
            norm = FieldNormalizer(self.normalizer.lo.copy(), self.normalizer.hi.copy())
        return EncoderSurrogate(self.config, {k: v.copy() for k, v in self.params.items()}, norm)

    # --- forward -------------------------------------------------------------

    def _check_inputs(self, tokens: np.ndarray, mask: np.ndarray):
        c = self.config
        if tokens.ndim != 3 or tokens.shape[2] != c.n_fields:
            raise ValueError(f"tokens must be (B, L, {c.n_fields}), got {tokens.shape}")
        if tokens.shape[1] > c.max_layers:
            raise ValueError(f"sequence {tokens.shape[1]} exceeds positional table {c.max_layers}")
        if mask.shape != tokens.shape[:2]:
            raise ValueError(f"mask shape {mask.shape} does not match tokens {tokens.shape[:2]}")
        if (mask.sum(axis=1) < 1).any():
            raise ValueError("every sample needs at least one active token")

    def forward(
        self,
        tokens: np.ndarray,
        mask: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
        want_cache: bool = False,
    ):
        """Predictions (B,) for padded token batches. train=True activates
        dropout and requires an rng; want_cache keeps every intermediate for
        the backward pass."""
        c = self.config
        p = self.params
        tokens = np.asarray(tokens, dtype=float)
        mask = np.asarray(mask, dtype=float)
        self._check_inputs(tokens, mask)
        if train and c.p_drop > 0 and rng is None:
            raise ValueError("training-mode forward needs an rng for dropout")
        B, L, _ = tokens.shape
        keep = 1.0 - c.p_drop if train else 1.0

        z = tokens @ p["lift_w"] + p["lift_b"].sum(axis=0) + p["pos"][:L]
        key_bias = (1.0 - mask)[:, None, None, :] * _NEG  # (B,1,1,L)
        cache: dict = {"tokens": tokens, "mask": mask, "blocks": []}
        for i in range(c.n_blocks):
            pre = f"b{i}."
            bc: dict = {"z_in": z}
            zh1, ln1c = _layer_norm(z, p[pre + "ln1_g"], p[pre + "ln1_b"])
            bc["zh1"], bc["ln1"] = zh1, ln1c
            q = (zh1 @ p[pre + "wq"] + p[pre + "bq"]).reshape(B, L, c.n_heads, c.d_head).transpose(0, 2, 1, 3)
            k = (zh1 @ p[pre + "wk"] + p[pre + "bk"]).reshape(B, L, c.n_heads, c.d_head).transpose(0, 2, 1, 3)
            v = (zh1 @ p[pre + "wv"] + p[pre + "bv"]).reshape(B, L, c.n_heads, c.d_head).transpose(0, 2, 1, 3)
            scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(c.d_head) + key_bias
            shifted = scores - scores.max(axis=-1, keepdims=True)
            e = np.exp(shifted)
            probs = e / e.sum(axis=-1, keepdims=True)
            if train and c.p_drop > 0:
                dm = (rng.random(probs.shape) >= c.p_drop).astype(float)
                probs_used = probs * dm / keep
            else:
                dm = None
                probs_used = probs
            o = (probs_used @ v).transpose(0, 2, 1, 3).reshape(B, L, c.d_enc)
            attn_out = o @ p[pre + "wo"] + p[pre + "bo"]
            h = z + attn_out
            bc.update(q=q, k=k, v=v, probs=probs, attn_drop=dm, o=o)

            zh2, ln2c = _layer_norm(h, p[pre + "ln2_g"], p[pre + "ln2_b"])
            u = zh2 @ p[pre + "w1"] + p[pre + "b1"]
            cdf = _gelu_cdf(u)
            a = u * cdf
            ff = a @ p[pre + "w2"] + p[pre + "b2"]
            if train and c.p_drop > 0:
                dm2 = (rng.random(ff.shape) >= c.p_drop).astype(float)
                ff_used = ff * dm2 / keep
            else:
                dm2 = None
                ff_used = ff
            z = h + ff_used
            bc.update(h=h, zh2=zh2, ln2=ln2c, u=u, cdf=cdf, a=a, ffn_drop=dm2)
            cache["blocks"].append(bc)

        counts = mask.sum(axis=1)
        pooled = (z * mask[..., None]).sum(axis=1) / counts[:, None]
        y = pooled @ p["head_w"] + p["head_b"][0]
        cache.update(z_final=z, pooled=pooled, counts=counts, keep=keep)
        if want_cache:
            return y, cache
        return y

    # --- backward ------------------------------------------------------------

    def backward(self, cache: dict, dy: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of sum_b dy_b * y_b with respect to every parameter."""
        c = self.config
        p = self.params
        mask = cache["mask"]
        keep = cache["keep"]
        B, L = mask.shape
        grads: dict[str, np.ndarray] = {}

        grads["head_w"] = cache["pooled"].T @ dy
        grads["head_b"] = np.array([dy.sum()])
        dpooled = dy[:, None] * p["head_w"][None, :]
        dz = dpooled[:, None, :] * (mask / cache["counts"][:, None])[..., None]

        for i in reversed(range(c.n_blocks)):
            pre = f"b{i}."
            bc = cache["blocks"][i]
            # z_out = h + dropout(ffn(ln2(h)))
            dff_used = dz
            dh = dz.copy()
            dff = dff_used * bc["ffn_drop"] / keep if bc["ffn_drop"] is not None else dff_used
            grads[pre + "w2"] = _contract(bc["a"], dff)
            grads[pre + "b2"] = dff.sum(axis=(0, 1))
            da = dff @ p[pre + "w2"].T
            du = da * _gelu_grad(bc["u"], bc["cdf"])
            grads[pre + "w1"] = _contract(bc["zh2"], du)
            grads[pre + "b1"] = du.sum(axis=(0, 1))
            dzh2 = du @ p[pre + "w1"].T
            dx, dg, db = _layer_norm_backward(dzh2, bc["ln2"], p[pre + "ln2_g"])
            grads[pre + "ln2_g"], grads[pre + "ln2_b"] = dg, db
            dh = dh + dx

            # h = z_in + attn_out
            dattn = dh
            grads[pre + "wo"] = _contract(bc["o"], dattn)
            grads[pre + "bo"] = dattn.sum(axis=(0, 1))
            do = (dattn @ p[pre + "wo"].T).reshape(B, L, c.n_heads, c.d_head).transpose(0, 2, 1, 3)
            probs_used = bc["probs"] * bc["attn_drop"] / keep if bc["attn_drop"] is not None else bc["probs"]
            dprobs_used = do @ bc["v"].transpose(0, 1, 3, 2)
            dv = probs_used.transpose(0, 1, 3, 2) @ do
            dprobs = dprobs_used * bc["attn_drop"] / keep if bc["attn_drop"] is not None else dprobs_used
            dscores = bc["probs"] * (dprobs - (dprobs * bc["probs"]).sum(axis=-1, keepdims=True))
            dscores = dscores / np.sqrt(c.d_head)
            dq = dscores @ bc["k"]
            dk = dscores.transpose(0, 1, 3, 2) @ bc["q"]

            def flat(t):
                return t.transpose(0, 2, 1, 3).reshape(B, L, c.d_enc)

            dqf, dkf, dvf = flat(dq), flat(dk), flat(dv)
            zh1 = bc["zh1"]
            grads[pre + "wq"] = _contract(zh1, dqf)
            grads[pre + "wk"] = _contract(zh1, dkf)
            grads[pre + "wv"] = _contract(zh1, dvf)
            grads[pre + "bq"] = dqf.sum(axis=(0, 1))
            grads[pre + "bk"] = dkf.sum(axis=(0, 1))
            grads[pre + "bv"] = dvf.sum(axis=(0, 1))
            dzh1 = dqf @ p[pre + "wq"].T + dkf @ p[pre + "wk"].T + dvf @ p[pre + "wv"].T
            dx, dg, db = _layer_norm_backward(dzh1, bc["ln1"], p[pre + "ln1_g"])
            grads[pre + "ln1_g"], grads[pre + "ln1_b"] = dg, db
            dz = dh + dx

        grads["pos"] = np.zeros_like(p["pos"])
        grads["pos"][:L] = dz.sum(axis=0)
        grads["lift_w"] = _contract(cache["tokens"], dz)
        db_shared = dz.sum(axis=(0, 1))
        grads["lift_b"] = np.tile(db_shared, (c.n_fields, 1))
        return grads

    def loss_and_grads(
        self,
        tokens: np.ndarray,
        mask: np.ndarray,
        labels: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ):
        """Mean-L1 loss and its parameter gradients on one batch."""
        y, cache = self.forward(tokens, mask, train=train, rng=rng, want_cache=True)
        labels = np.asarray(labels, dtype=float)
        resid = y - labels
        loss = float(np.abs(resid).mean())
        dy = np.sign(resid) / resid.shape[0]
        return loss, self.backward(cache, dy)

    # --- inference -----------------------------------------------------------

    def predict(self, tokens: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return self.forward(tokens, mask, train=False)

    def predict_genomes(self, genomes) -> np.ndarray:
        from .features import featurize_batch

        if self.normalizer is None:
            raise ValueError("surrogate has no fitted normalizer; train or load first")
        toks, masks = featurize_batch(genomes, self.normalizer, self.config.max_layers)
        return self.predict(toks, masks)

    def mc_predict(self, tokens: np.ndarray, mask: np.ndarray, n_mc: int = 10, seed: int = 0):
        """Mean and spread of n_mc stochastic (dropout-on) forward passes.

        With p_drop == 0 every pass coincides, so sigma is exactly zero.
        """
        if n_mc < 1:
            raise ValueError("n_mc must be >= 1")
        if self.config.p_drop == 0 or n_mc == 1:
            mu = self.forward(tokens, mask, train=False)
            return mu, np.zeros_like(mu)
        rng = np.random.default_rng(seed)
        draws = np.stack([self.forward(tokens, mask, train=True, rng=rng) for _ in range(n_mc)])
        return draws.mean(axis=0), draws.std(axis=0)

    def mc_predict_genomes(self, genomes, n_mc: int = 10, seed: int = 0):
        from .features import featurize_batch

        if self.normalizer is None:
            raise ValueError("surrogate has no fitted normalizer; train or load first")
        toks, masks = featurize_batch(genomes, self.normalizer, self.config.max_layers)
        return self.mc_predict(toks, masks, n_mc=n_mc, seed=seed)

    # --- checkpointing ---------------------------------------------------------

    def save(self, path: str) -> None:
        """Single self-describing .npz: config, parameter names/shapes in
        order, one flat float64 vector, normalizer stats."""
        names = list(self.params.keys())
        meta = {
            "format": "ihasearch-encoder-v1",
            "config": asdict(self.config),
            "names": names,
            "shapes": [list(self.params[n].shape) for n in names],
            "normalizer": self.normalizer is not None,
        }
        flat = np.concatenate([self.params[n].ravel() for n in names])
        arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), "theta": flat}
        if self.normalizer is not None:
            arrays["norm_lo"] = self.normalizer.lo
            arrays["norm_hi"] = self.normalizer.hi
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: str) -> "EncoderSurrogate":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            if meta.get("format") != "ihasearch-encoder-v1":
                raise ValueError(f"not an encoder checkpoint: {path}")
            theta = z["theta"]
            params = {}
            off = 0
            for name, shape in zip(meta["names"], meta["shapes"]):
                size = int(np.prod(shape)) if shape else 1
                params[name] = theta[off : off + size].reshape(shape).copy()
                off += size
            norm = None
            if meta["normalizer"]:
                norm = FieldNormalizer(z["norm_lo"].copy(), z["norm_hi"].copy())
        return cls(EncoderConfig(**meta["config"]), params, norm)
