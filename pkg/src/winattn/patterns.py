"""Static sparse-attention patterns and the sliding-chunks plan.

Generates the per-row attended column sets (window band, global tokens,
statically drawn random tokens) and the overlapping-chunk schedule used by
the chunked baseline, together with its exact redundancy ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from . import rng
from .config import AttentionConfig


class Provenance(Enum):
    WINDOW = "window"
    GLOBAL = "global"
    RANDOM = "random"


@dataclass(frozen=True)
class AttendSet:
    """Sorted attended columns of one row, each tagged with its origin."""

    row: int
    cols: tuple[int, ...]
    provenance: tuple[Provenance, ...]

    def __post_init__(self):
        if not self.cols:
            raise ValueError(f"row {self.row}: attend set must be non-empty")
        if len(self.cols) != len(self.provenance):
            raise ValueError("cols and provenance must have equal length")
        if any(b <= a for a, b in zip(self.cols, self.cols[1:])):
            raise ValueError("cols must be sorted strictly increasing")

    def __len__(self) -> int:
        return len(self.cols)

    def cols_with(self, kind: Provenance) -> tuple[int, ...]:
        return tuple(c for c, p in zip(self.cols, self.provenance) if p is kind)


def window_bounds(i: int, n: int, w: int) -> tuple[int, int]:
    """Half-open column range [lo, hi) of row i's window, clipped to [0, n)."""
    return max(0, i - w), min(n, i + w)


def window_attend_set(i: int, n: int, w: int) -> AttendSet:
    """Window band of row i: columns {i-w, ..., i+w-1} clipped to [0, n)."""
    if not 0 <= i < n:
        raise ValueError(f"row {i} out of range [0, {n})")
    if w < 1:
        raise ValueError("half-window must be >= 1")
    lo, hi = window_bounds(i, n, w)
    cols = tuple(range(lo, hi))
    return AttendSet(i, cols, (Provenance.WINDOW,) * len(cols))


def random_indices(i: int, seed: int, r: int, n: int, excluded) -> tuple[int, ...]:
    """r distinct random columns for row i, disjoint from ``excluded``.

    Deterministic function of (i, seed): candidates come from the stream
    keyed by ``derive_key(seed, LABEL_RANDOM, i)`` reduced modulo n, with
    rejection of excluded or already-drawn indices. Returned in draw order.
    """
    excluded = set(excluded)
    if r < 0:
        raise ValueError("random_per_row must be >= 0")
    if r + len(excluded) > n:
        raise ValueError(f"cannot draw {r} indices outside {len(excluded)} excluded from {n}")
    key = rng.derive_key(seed, rng.LABEL_RANDOM, i)
    drawn: list[int] = []
    taken = set(excluded)
    counter = 0
    while len(drawn) < r:
        cand = rng.stream_value(key, counter) % n
        counter += 1
        if cand in taken:
            continue
        drawn.append(cand)
        taken.add(cand)
    return tuple(drawn)


def build_attend_sets(config: AttentionConfig) -> list[AttendSet]:
    """Per-row attended sets for the full configuration.

    Overlaps resolve window > global > random: a global token inside the
    row's window keeps WINDOW provenance, and random draws are rejected
    against both the window and the globals.
    """
    n, w = config.seq_len, config.half_window
    globals_ = config.global_tokens
    sets = []
    for i in range(n):
        lo, hi = window_bounds(i, n, w)
        tagged = {c: Provenance.WINDOW for c in range(lo, hi)}
        for g in globals_:
            if g not in tagged:
                tagged[g] = Provenance.GLOBAL
        if config.random_per_row:
            excluded = set(range(lo, hi)) | set(globals_)
            for c in random_indices(i, config.random_seed, config.random_per_row, n, excluded):
                tagged[c] = Provenance.RANDOM
        cols = tuple(sorted(tagged))
        sets.append(AttendSet(i, cols, tuple(tagged[c] for c in cols)))
    return sets


def chunk_redundancy_ratio(chunk_count: int) -> Fraction:
    """Redundant fraction of chunked-band MACs: 1/2 - 1/(4*chunk_count)."""
    if chunk_count < 1:
        raise ValueError("chunk count must be >= 1")
    return Fraction(1, 2) - Fraction(1, 4 * chunk_count)


@dataclass(frozen=True)
class ChunkSpan:
    """One 2w-wide dense chunk: rows and columns [start, start+2w)."""

    index: int
    start: int
    stop: int


@dataclass(frozen=True)
class ChunkPlan:
    """Overlapping-chunk schedule covering the window band.

    Chunks are 2w x 2w squares on the diagonal at stride w, so consecutive
    chunks overlap by w rows/columns; ``overlaps`` lists the shared
    [start, stop) diagonal squares.
    """

    seq_len: int
    half_window: int
    chunks: tuple[ChunkSpan, ...]
    overlaps: tuple[tuple[int, int], ...]

    @property
    def chunk_width(self) -> int:
        return 2 * self.half_window

    @property
    def chunk_count(self) -> int:
        return len(self.chunks)

    @property
    def redundancy_ratio(self) -> Fraction:
        return chunk_redundancy_ratio(self.chunk_count)


def sliding_chunks_plan(n: int, w: int) -> ChunkPlan:
    """Chunk schedule for sequence length n and half-window w.

    Requires w >= 1, n >= 2w and n divisible by w; the resulting plan has
    n/w - 1 chunks.
    """
    if w < 1:
        raise ValueError("half-window must be >= 1")
    if n < 2 * w:
        raise ValueError(f"seq_len={n} shorter than one chunk of width {2 * w}")
    if n % w != 0:
        raise ValueError(f"seq_len={n} not divisible by half-window {w}; pad first")
    count = n // w - 1
    chunks = tuple(ChunkSpan(k, k * w, k * w + 2 * w) for k in range(count))
    overlaps = tuple((k * w + w, k * w + 2 * w) for k in range(count - 1))
    return ChunkPlan(n, w, chunks, overlaps)


def attend_sets_to_json(sets: list[AttendSet], config: AttentionConfig | None = None) -> str:
    """Serialize attended sets to the documented JSON form."""
    doc: dict = {}
    if config is not None:
        doc["config"] = {
            "seq_len": config.seq_len,
            "half_window": config.half_window,
            "global_tokens": list(config.global_tokens),
            "random_per_row": config.random_per_row,
            "random_seed": config.random_seed,
        }
    doc["rows"] = [
        {"row": s.row, "cols": list(s.cols), "provenance": [p.value for p in s.provenance]}
        for s in sets
    ]
    return json.dumps(doc, indent=2, sort_keys=True)


def attend_sets_from_json(text: str) -> list[AttendSet]:
    doc = json.loads(text)
    return [
        AttendSet(r["row"], tuple(r["cols"]), tuple(Provenance(p) for p in r["provenance"]))
        for r in doc["rows"]
    ]
