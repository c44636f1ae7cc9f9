"""Analytical FLOP, memory-traffic, footprint and energy models.

Standard transformer operation counting (one MAC = 2 FLOPs) split into the
linear projections, the attention proper and the FFN, with the attention
term specialized for the dense, windowed and overlapping-chunk variants.
These models validate scaling trends, not absolute hardware measurements;
clock and power always come from the caller.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .patterns import chunk_redundancy_ratio

COMPONENTS = ("linear", "attention", "ffn")


class AttnKind(Enum):
    DENSE = "dense"
    WINDOW = "window"
    SLIDING_CHUNKS = "sliding_chunks"


@dataclass(frozen=True)
class ModelDims:
    """Whole-model dimensions for the breakdown formulas."""

    d_model: int = 768
    heads: int = 12
    head_dim: int = 64
    ffn_mult: float = 4.0
    layers: int = 1

    def __post_init__(self):
        if min(self.d_model, self.heads, self.head_dim, self.layers) < 1 or self.ffn_mult <= 0:
            raise ValueError("all model dimensions must be positive")
        if self.heads * self.head_dim != self.d_model:
            raise ValueError(
                f"heads*head_dim must equal d_model: {self.heads}*{self.head_dim} != {self.d_model}")


@dataclass(frozen=True)
class EnergySpec:
    """A (clock, power) operating point used to convert cycles to joules."""

    label: str
    clock_hz: float
    power_watts: float

    def __post_init__(self):
        if self.clock_hz <= 0 or self.power_watts <= 0:
            raise ValueError("clock_hz and power_watts must be positive")


@dataclass(frozen=True)
class CostReport:
    """Per-component operation/byte counts for one (N, attention kind)."""

    seq_len: int
    kind: AttnKind
    half_window: int | None
    flops: dict[str, float]
    mops: dict[str, float]
    peak_memory_bytes: int
    offchip_bytes: float
    redundancy_ratio: Fraction | None

    @property
    def total_flops(self) -> float:
        return sum(self.flops.values())

    def flops_share(self, component: str) -> float:
        return self.flops[component] / self.total_flops

    def mops_share(self, component: str) -> float:
        return self.mops[component] / sum(self.mops.values())


def chunk_count_for(n: int, w: int) -> int:
    """Chunks of the overlapping schedule at length n, clamped to >= 1."""
    return max(1, n // w - 1)


def flops_breakdown(dims: ModelDims, n: int, kind: AttnKind,
                    half_window: int | None = None, bytes_per_scalar: int = 4,
                    batch: int = 1) -> CostReport:
    """Operation and byte counts for one sequence length and attention kind.

    Linear projections: 8*N*d^2 FLOPs (Q/K/V/output, MAC = 2 FLOPs); FFN:
    4*ffn_mult*N*d^2; attention: 4*N^2*d dense, 4*N*2w*d windowed, and the
    windowed count divided by (1 - redundancy) for the chunked baseline.
    Byte counts mirror the same structure; the windowed (fused, streaming)
    variant moves no score traffic off-chip.
    """
    if n < 1 or batch < 1 or bytes_per_scalar < 1:
        raise ValueError("n, batch and bytes_per_scalar must be >= 1")
    if kind is not AttnKind.DENSE and (half_window is None or half_window < 1):
        raise ValueError(f"{kind.value} needs a positive half_window")
    d, f, layers, b = dims.d_model, dims.ffn_mult, dims.layers, bytes_per_scalar
    w = half_window
    linear_flops = 8 * n * d * d * layers
    ffn_flops = 4 * f * n * d * d * layers
    linear_mops = (5 * n * d + 4 * d * d) * b * layers
    ffn_mops = (2 * n * d + 2 * f * n * d + 2 * f * d * d) * b * layers

    redundancy = None
    if kind is AttnKind.DENSE:
        attn_flops = 4 * n * n * d * layers
        attn_mops = (4 * n * d + 4 * dims.heads * n * n) * b * layers
    elif kind is AttnKind.WINDOW:
        attn_flops = 4 * n * (2 * w) * d * layers
        attn_mops = 4 * n * d * b * layers
    else:
        c = chunk_count_for(n, w)
        redundancy = chunk_redundancy_ratio(c)
        attn_flops = 4 * n * (2 * w) * d * layers / (1.0 - float(redundancy))
        attn_mops = (4 * n * d + 4 * dims.heads * c * (2 * w) ** 2) * b * layers

    flops = {"linear": float(batch * linear_flops),
             "attention": float(batch * attn_flops),
             "ffn": float(batch * ffn_flops)}
    mops = {"linear": float(batch * linear_mops),
            "attention": float(batch * attn_mops),
            "ffn": float(batch * ffn_mops)}
    peak = batch * memory_peak(kind, n, w if w is not None else n, dims.head_dim, b)
    return CostReport(n, kind, w, flops, mops, peak, sum(mops.values()), redundancy)


def memory_peak(kind: AttnKind, n: int, w: int, head_dim: int, bytes_per_scalar: int) -> int:
    """Peak bytes resident for one head's attention.

    Dense materializes the N x N score matrix next to Q/K/V; the streaming
    window variant holds Q/K/V off-chip plus one window of K/V pairs, one
    Q row, one Z row and the score slots on-chip; the chunked baseline
    materializes every chunk's score and probability tiles.
    """
    if min(n, w, head_dim, bytes_per_scalar) < 1:
        raise ValueError("all arguments must be positive")
    h, b = head_dim, bytes_per_scalar
    qkv = 3 * n * h * b
    if kind is AttnKind.DENSE:
        return n * n * b + qkv
    if kind is AttnKind.WINDOW:
        return qkv + (2 * (2 * w) * h + 2 * h + 2 * w) * b
    c = chunk_count_for(n, w)
    return c * (2 * w) ** 2 * 2 * b + qkv


def energy_per_attention(cycles: int, spec: EnergySpec) -> float:
    """Joules for one attention pass: cycles / clock * power."""
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    return cycles / spec.clock_hz * spec.power_watts


def energy_ratio(cycles_a: int, spec_a: EnergySpec, cycles_b: int, spec_b: EnergySpec) -> float:
    """Energy of operating point A relative to B for the given cycle counts."""
    return energy_per_attention(cycles_a, spec_a) / energy_per_attention(cycles_b, spec_b)


def cost_sweep(dims: ModelDims, seq_lens, kinds=None, half_window: int = 32,
               bytes_per_scalar: int = 4, batch: int = 1) -> list[CostReport]:
    """Reports for every (N, kind) cell, sorted by (N, kind)."""
    kinds = tuple(kinds) if kinds is not None else tuple(AttnKind)
    reports = [
        flops_breakdown(dims, n, kind, half_window=half_window,
                        bytes_per_scalar=bytes_per_scalar, batch=batch)
        for n in sorted(seq_lens)
        for kind in sorted(kinds, key=lambda k: k.value)
    ]
    return reports


CSV_COLUMNS = (
    "seq_len", "kind", "half_window",
    "flops_linear", "flops_attention", "flops_ffn", "flops_total",
    "mops_linear", "mops_attention", "mops_ffn", "mops_total",
    "peak_memory_bytes", "offchip_bytes", "redundancy_ratio",
)


def report_row(r: CostReport) -> dict:
    return {
        "seq_len": r.seq_len,
        "kind": r.kind.value,
        "half_window": r.half_window if r.half_window is not None else "",
        "flops_linear": r.flops["linear"],
        "flops_attention": r.flops["attention"],
        "flops_ffn": r.flops["ffn"],
        "flops_total": r.total_flops,
        "mops_linear": r.mops["linear"],
        "mops_attention": r.mops["attention"],
        "mops_ffn": r.mops["ffn"],
        "mops_total": sum(r.mops.values()),
        "peak_memory_bytes": r.peak_memory_bytes,
        "offchip_bytes": r.offchip_bytes,
        "redundancy_ratio": str(r.redundancy_ratio) if r.redundancy_ratio is not None else "",
    }


def write_reports_csv(reports: list[CostReport], fileobj) -> None:
    writer = csv.DictWriter(fileobj, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for r in reports:
        writer.writerow(report_row(r))


def reports_json(reports: list[CostReport]) -> str:
    return json.dumps([report_row(r) for r in reports], indent=2, sort_keys=True)
