"""Per-layer resource profiling shared by every hardware backend."""
from dataclasses import dataclass
from typing import NamedTuple

from ..genome import ArchGenome, GlobalConfig, LayerGene, layer_param_count


class HWCost(NamedTuple):
    """Common backend output: energy per token [J], TTFT [s], TPOT [s]."""

    e_tok_j: float
    ttft_s: float
    tpot_s: float


@dataclass(frozen=True)
class Workload:
    """Inference workload: prefill followed by token-by-token decode."""

    prefill_tokens: int = 256
    decode_tokens: int = 256

    def __post_init__(self):
        if self.prefill_tokens < 1 or self.decode_tokens < 1:
            raise ValueError("prefill and decode lengths must be >= 1")

    @property
    def ctx_mean(self) -> float:
        """Mean decode-phase context length (prefill plus half the decode)."""
        return self.prefill_tokens + self.decode_tokens / 2

    @property
    def ctx_peak(self) -> int:
        """Largest context reached; sizes KV-cache capacity."""
        return self.prefill_tokens + self.decode_tokens


@dataclass(frozen=True)
class LayerProfile:
    """Resource footprint of one active layer.

    weight_bytes       weights resident on chip
    kv_bytes_per_token KV-cache growth per context token (0 when attn=0)
    decode_ops         MACs to emit one token (weights + attention scores/values)
    act_bytes          peak activation bytes, double-buffered
    """

    weight_bytes: int
    kv_bytes_per_token: int
    decode_ops: float
    act_bytes: int

    def __post_init__(self):
        if min(self.weight_bytes, self.kv_bytes_per_token, self.decode_ops, self.act_bytes) < 0:
            raise ValueError("profile entries must be non-negative")


def profile_layer(
    gene: LayerGene,
    global_cfg: GlobalConfig,
    ctx_tokens: float = 384.0,
    bytes_per_elem: int = 1,
) -> LayerProfile:
    """Profile one active layer at a fixed attention context length.

    decode_ops counts one MAC per resident weight plus, when attention is
    enabled, the per-head score and value MACs against ctx_tokens cached
    entries.  The default context matches the standard 256/256 workload mean.
    """
    if gene.mask != 1:
        raise ValueError("cannot profile an inactive layer")
    d = global_cfg.d_model
    weights = layer_param_count(gene, d)
    kv = gene.attn * gene.n_kv * (gene.d_qk + gene.d_v) * bytes_per_elem
    ops = float(weights)
    if gene.attn == 1:
        ops += gene.n_h * (gene.d_qk + gene.d_v) * ctx_tokens
    act = 2 * max(d, gene.n_h * gene.d_v, gene.d_mlp) * bytes_per_elem
    return LayerProfile(weights * bytes_per_elem, kv, ops, act)


def profile_model(
    genome: ArchGenome,
    workload: Workload,
    bytes_per_elem: int = 1,
) -> list[LayerProfile]:
    """Profiles for every active layer, in layer order."""
    return [
        profile_layer(g, genome.global_cfg, workload.ctx_mean, bytes_per_elem)
        for g in genome.active_layers()
    ]
