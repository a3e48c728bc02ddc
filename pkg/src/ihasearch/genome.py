"""Architecture genomes: per-layer attention genes, validation, repair, counting.

A genome is a fixed-length list of layer genes under one global config.  Each
gene carries its own attention shape (n_h, n_kv, d_qk, d_v) with the single
structural constraint that n_kv divides n_h; a mask bit gates the whole layer
and an attn bit gates the attention sublayer.  Two attention variants are
distinguished when counting the space: "gqa" (head dims tied to d_model/n_h)
and "iha" (all four shape fields free on their grids).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

GQA = "gqa"
IHA = "iha"

DEFAULT_VOCAB_SIZE = 50257


@dataclass(frozen=True)
class FieldRange:
    """Integer grid {lo, lo+step, ..., hi}. lo <= hi, step >= 1."""

    lo: int
    step: int
    hi: int

    def __post_init__(self):
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")
        if self.lo > self.hi:
            raise ValueError(f"empty grid: lo={self.lo} > hi={self.hi}")

    def values(self) -> list[int]:
        return list(range(self.lo, self.hi + 1, self.step))

    def __len__(self) -> int:
        return (self.hi - self.lo) // self.step + 1

    def contains(self, x: int) -> bool:
        return self.lo <= x <= self.hi and (x - self.lo) % self.step == 0

    def snap(self, x: int) -> int:
        """Clamp to the grid span and round to the nearest point.

        Exact midpoints round toward the smaller grid value.
        """
        top = self.lo + (len(self) - 1) * self.step
        x = min(max(int(x), self.lo), top)
        k, r = divmod(x - self.lo, self.step)
        if 2 * r > self.step:
            k += 1
        return self.lo + k * self.step


@dataclass(frozen=True)
class SpaceRanges:
    """Per-field search grids plus the admissible attention variants."""

    n_h: FieldRange = FieldRange(1, 1, 16)
    n_kv: FieldRange = FieldRange(1, 1, 16)
    d_qk: FieldRange = FieldRange(64, 32, 512)
    d_v: FieldRange = FieldRange(64, 32, 512)
    d_mlp: FieldRange = FieldRange(512, 256, 4096)
    variants: tuple[str, ...] = (GQA, IHA)

    def field(self, name: str) -> FieldRange:
        return getattr(self, name)


NUMERIC_FIELDS = ("n_h", "n_kv", "d_qk", "d_v", "d_mlp")


@dataclass(frozen=True)
class LayerGene:
    """One layer: gate bits plus attention/MLP shape.

    mask=0 disables the layer entirely (other fields are ignored); attn=0
    keeps the MLP but makes the attention sublayer an identity.
    """

    mask: int
    attn: int
    n_h: int
    n_kv: int
    d_qk: int
    d_v: int
    d_mlp: int


@dataclass(frozen=True)
class GlobalConfig:
    d_model: int = 768
    block_size: int = 1024
    max_layers: int = 40


@dataclass(frozen=True)
class ArchGenome:
    """A fixed-length stack of layer genes under one global config."""

    global_cfg: GlobalConfig
    layers: tuple[LayerGene, ...]

    def active_layers(self) -> list[LayerGene]:
        return [g for g in self.layers if g.mask == 1]

    def n_active(self) -> int:
        return sum(g.mask == 1 for g in self.layers)


@dataclass(frozen=True)
class Violation:
    """One validation failure. layer is None for genome-level rules."""

    layer: int | None
    field: str
    rule: str

    def __str__(self) -> str:
        where = "genome" if self.layer is None else f"layer {self.layer}"
        return f"{where}: {self.field}: {self.rule}"


def validate(genome: ArchGenome, ranges: SpaceRanges | None = None) -> list[Violation]:
    """Return all rule violations; an empty list means the genome is well formed.

    Checked rules: positive global dims, exactly max_layers genes, at least one
    active layer, gate bits in {0,1}, and for every active layer grid
    membership of each numeric field plus n_kv | n_h.
    """
    ranges = ranges or SpaceRanges()
    out: list[Violation] = []
    g = genome.global_cfg
    for name in ("d_model", "block_size", "max_layers"):
        if getattr(g, name) < 1:
            out.append(Violation(None, name, "must be >= 1"))
    if len(genome.layers) != g.max_layers:
        out.append(Violation(None, "layers", f"expected {g.max_layers} genes, got {len(genome.layers)}"))
    if not any(gene.mask == 1 for gene in genome.layers):
        out.append(Violation(None, "mask", "at least one layer must be active"))
    for i, gene in enumerate(genome.layers):
        for bit in ("mask", "attn"):
            if getattr(gene, bit) not in (0, 1):
                out.append(Violation(i, bit, "must be 0 or 1"))
        if gene.mask != 1:
            continue  # inactive layers are not constrained further
        for name in NUMERIC_FIELDS:
            if not ranges.field(name).contains(getattr(gene, name)):
                r = ranges.field(name)
                out.append(Violation(i, name, f"not on grid [{r.lo}:{r.step}:{r.hi}]"))
        if gene.n_kv >= 1 and gene.n_h >= 1 and gene.n_h % gene.n_kv != 0:
            out.append(Violation(i, "n_kv", f"{gene.n_kv} does not divide n_h={gene.n_h}"))
    return out


def _largest_divisor_at_most(n: int, cap: int) -> int:
    for d in range(min(cap, n), 0, -1):
        if n % d == 0:
            return d
    return 1


def repair(genome: ArchGenome, ranges: SpaceRanges | None = None) -> ArchGenome:
    """Project a genome onto the valid space. Idempotent.

    Numeric fields are clamped and snapped to their grids (midpoint ties go
    to the smaller value), then n_kv is replaced by the largest divisor of
    n_h that is <= the snapped n_kv.  Gate bits are clamped to {0,1}.  If no
    layer is left active, layer 0 is re-activated.  Gene lists of the wrong
    length are padded with inactive minimal genes or truncated.
    """
    ranges = ranges or SpaceRanges()
    g = genome.global_cfg
    gcfg = GlobalConfig(max(1, g.d_model), max(1, g.block_size), max(1, g.max_layers))

    def fix(gene: LayerGene) -> LayerGene:
        n_h = ranges.n_h.snap(gene.n_h)
        n_kv = _largest_divisor_at_most(n_h, ranges.n_kv.snap(gene.n_kv))
        return LayerGene(
            mask=1 if gene.mask >= 1 else 0,
            attn=1 if gene.attn >= 1 else 0,
            n_h=n_h,
            n_kv=n_kv,
            d_qk=ranges.d_qk.snap(gene.d_qk),
            d_v=ranges.d_v.snap(gene.d_v),
            d_mlp=ranges.d_mlp.snap(gene.d_mlp),
        )

    pad = LayerGene(0, 1, ranges.n_h.lo, ranges.n_kv.lo, ranges.d_qk.lo, ranges.d_v.lo, ranges.d_mlp.lo)
    layers = [fix(gene) for gene in genome.layers[: gcfg.max_layers]]
    layers += [pad] * (gcfg.max_layers - len(layers))
    if not any(gene.mask == 1 for gene in layers):
        layers[0] = replace(layers[0], mask=1)
    return ArchGenome(gcfg, tuple(layers))


def group_map(h: int, n_h: int, n_kv: int) -> int:
    """KV group serving query head h (both 1-indexed): 1 + (h-1) // (n_h/n_kv)."""
    if n_h < 1 or n_kv < 1 or n_h % n_kv != 0:
        raise ValueError(f"n_kv={n_kv} must divide n_h={n_h}")
    if not 1 <= h <= n_h:
        raise ValueError(f"head index {h} outside 1..{n_h}")
    r = n_h // n_kv
    return 1 + (h - 1) // r


def layer_param_count(gene: LayerGene, d_model: int) -> int:
    """Weight count of one active layer: QKVO projections (attn=1 only) plus
    the two MLP matrices.  No biases or norm parameters."""
    total = 2 * d_model * gene.d_mlp
    if gene.attn == 1:
        total += d_model * (gene.n_h * gene.d_qk + gene.n_kv * gene.d_qk + gene.n_kv * gene.d_v)
        total += gene.n_h * gene.d_v * d_model
    return total


def count_params(genome: ArchGenome, vocab_size: int = DEFAULT_VOCAB_SIZE) -> int:
    """Weight count of the decoded architecture (no biases or norm params).

    vocab_size * d_model embedding plus, per active layer, the four attention
    projections when attn=1 and the two MLP matrices.
    """
    d = genome.global_cfg.d_model
    return vocab_size * d + sum(layer_param_count(g, d) for g in genome.active_layers())


def count_attention_configs(variant: str, d_model: int = 768, ranges: SpaceRanges | None = None) -> int:
    """Number of distinct per-layer attention shapes under a variant.

    gqa: n_h | d_model, n_kv | n_h, head dims pinned to d_model/n_h (one
    config per admissible (n_h, n_kv) pair).  iha: any (n_h, n_kv) with
    n_kv | n_h crossed with the free d_qk and d_v grids.
    """
    ranges = ranges or SpaceRanges()
    if variant not in (GQA, IHA):
        raise ValueError(f"unknown variant {variant!r}")
    pairs = 0
    for n_h in ranges.n_h.values():
        if variant == GQA and d_model % n_h != 0:
            continue
        pairs += sum(1 for n_kv in ranges.n_kv.values() if n_kv <= n_h and n_h % n_kv == 0)
    if variant == GQA:
        return pairs
    return pairs * len(ranges.d_qk) * len(ranges.d_v)


def random_genome(
    ranges: SpaceRanges | None = None,
    rng: np.random.Generator | None = None,
    global_cfg: GlobalConfig | None = None,
) -> ArchGenome:
    """Uniform independent draw of every field of every gene, then repair."""
    ranges = ranges or SpaceRanges()
    rng = rng if rng is not None else np.random.default_rng()
    gcfg = global_cfg or GlobalConfig()

    def draw(r: FieldRange) -> int:
        return int(rng.choice(r.values()))

    layers = tuple(
        LayerGene(
            mask=int(rng.integers(0, 2)),
            attn=int(rng.integers(0, 2)),
            n_h=draw(ranges.n_h),
            n_kv=draw(ranges.n_kv),
            d_qk=draw(ranges.d_qk),
            d_v=draw(ranges.d_v),
            d_mlp=draw(ranges.d_mlp),
        )
        for _ in range(gcfg.max_layers)
    )
    return repair(ArchGenome(gcfg, layers), ranges)


# --- serialization ---------------------------------------------------------

def to_dict(genome: ArchGenome) -> dict:
    return {
        "global": {
            "d_model": genome.global_cfg.d_model,
            "block_size": genome.global_cfg.block_size,
            "max_layers": genome.global_cfg.max_layers,
        },
        "layers": [
            {
                "mask": g.mask,
                "attn": g.attn,
                "n_h": g.n_h,
                "n_kv": g.n_kv,
                "d_qk": g.d_qk,
                "d_v": g.d_v,
                "d_mlp": g.d_mlp,
            }
            for g in genome.layers
        ],
    }


def from_dict(doc: dict) -> ArchGenome:
    g = doc["global"]
    return ArchGenome(
        GlobalConfig(int(g["d_model"]), int(g["block_size"]), int(g["max_layers"])),
        tuple(
            LayerGene(
                int(l["mask"]), int(l["attn"]), int(l["n_h"]), int(l["n_kv"]),
                int(l["d_qk"]), int(l["d_v"]), int(l["d_mlp"]),
            )
            for l in doc["layers"]
        ),
    )


def to_json(genome: ArchGenome) -> str:
    """Canonical single-line JSON: sorted keys, compact separators."""
    return json.dumps(to_dict(genome), sort_keys=True, separators=(",", ":"))


def from_json(text: str) -> ArchGenome:
    return from_dict(json.loads(text))


def genome_id(genome: ArchGenome) -> str:
    """Stable 12-hex content id of the canonical JSON form."""
    return hashlib.sha1(to_json(genome).encode()).hexdigest()[:12]


def genome_hash64(genome: ArchGenome) -> int:
    """64-bit content hash used to seed per-genome noise streams."""
    return int.from_bytes(hashlib.sha256(to_json(genome).encode()).digest()[:8], "big")
