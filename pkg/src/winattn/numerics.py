"""Attention kernels: unfused oracles, the fused row kernel, FIFO streaming
and the overlapping-chunk baseline.

``dense_attention`` / ``masked_dense_attention`` are the literal three-step
references every other path is checked against. ``fused_row_attention``
restructures softmax so the denominator is applied once after the
score-times-value sweep, which is what lets a row be computed in a single
pass over its (K, V) pairs. ``streaming_window_attention`` runs that kernel
over a fixed-size FIFO of key/value rows and counts off-chip row fetches.
``sliding_chunks_attention`` is the chunked baseline with its MAC and
redundancy counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import AttentionConfig, NumericMode
from .errors import NumericOverflowError
from .matrices import DenseMatrix, as_array
from .patterns import (
    AttendSet,
    ChunkPlan,
    random_indices,
    sliding_chunks_plan,
    window_bounds,
)


def max_relative_error(a, b) -> float:
    """max |a - b| scaled by the largest magnitude of the reference b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.abs(b).max()
    diff = np.abs(a - b).max()
    return float(diff if denom == 0.0 else diff / denom)


def softmax_row(row) -> np.ndarray:
    """Softmax of one score vector, always computed with max-subtraction."""
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("softmax_row needs a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("softmax_row entries must be finite")
    e = np.exp(arr - arr.max())
    return e / e.sum()


def _check_qkv(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> tuple[int, int]:
    if not (q.shape == k.shape == v.shape):
        raise ValueError(f"Q, K, V shapes differ: {q.shape}, {k.shape}, {v.shape}")
    return q.shape


def _scale_for(h: int, scale_scores: bool) -> float:
    return 1.0 / math.sqrt(h) if scale_scores else 1.0


def dense_attention(Q, K, V, scale_scores: bool = False) -> DenseMatrix:
    """Full attention as the literal three-step sequence (the unfused oracle)."""
    q, k, v = as_array(Q), as_array(K), as_array(V)
    _, h = _check_qkv(q, k, v)
    s = (q @ k.T) * _scale_for(h, scale_scores)
    e = np.exp(s - s.max(axis=1, keepdims=True))
    sp = e / e.sum(axis=1, keepdims=True)
    return DenseMatrix(sp @ v)


def _set_cols(s, n: int, i: int) -> np.ndarray:
    cols = np.asarray(s.cols if isinstance(s, AttendSet) else tuple(s), dtype=np.intp)
    if cols.size == 0:
        raise ValueError(f"row {i}: empty attend set, softmax undefined")
    if cols.min() < 0 or cols.max() >= n:
        raise ValueError(f"row {i}: attend column out of range [0, {n})")
    return cols


def masked_dense_attention(Q, K, V, sets, scale_scores: bool = False) -> DenseMatrix:
    """Attention where row i's softmax runs only over ``sets[i]``.

    Columns outside the set contribute exactly zero: scores are gathered,
    never just down-weighted. ``sets`` holds one AttendSet (or plain column
    sequence) per row.
    """
    q, k, v = as_array(Q), as_array(K), as_array(V)
    n, h = _check_qkv(q, k, v)
    if len(sets) != n:
        raise ValueError(f"need {n} attend sets, got {len(sets)}")
    scale = _scale_for(h, scale_scores)
    z = np.zeros_like(q)
    for i in range(n):
        cols = _set_cols(sets[i], n, i)
        p = softmax_row((k[cols] @ q[i]) * scale)
        z[i] = p @ v[cols]
    return DenseMatrix(z)


def _fused_block(q: np.ndarray, k_block: np.ndarray, v_block: np.ndarray,
                 mode: NumericMode, scale: float, row: int | None = None,
                 return_exponentials: bool = False):
    """Fused kernel over a gathered block of (K, V) rows.

    Returns (z, row_sum), plus the per-pair exponentials when asked. Raw
    mode exponentiates scores directly and raises NumericOverflowError when
    the resulting denominator is zero or non-finite; stable mode subtracts
    the block maximum first, so z is always finite, while the reported
    row_sum (the mathematical sum of raw exponentials) may still over- or
    underflow.
    """
    scores = k_block @ q
    if scale != 1.0:
        scores = scores * scale
    if mode is NumericMode.RAW:
        with np.errstate(over="ignore"):
            e = np.exp(scores)
            den = e.sum()
        if den == 0.0 or not np.isfinite(den):
            where = "" if row is None else f" at row {row}"
            raise NumericOverflowError(
                f"raw-mode softmax denominator is {den!r}{where}; "
                "use stable mode or rescale the inputs", row)
        row_sum = float(den)
    else:
        m = scores.max()
        e = np.exp(scores - m)
        den = e.sum()
        with np.errstate(over="ignore"):
            row_sum = float(den * np.exp(m))
    z = (e @ v_block) / den
    if return_exponentials:
        return z, row_sum, e
    return z, row_sum


def fused_row_attention(q, k_rows, v_rows, mode: NumericMode = NumericMode.STABLE,
                        scale_scores: bool = False):
    """One output row in a single pass over its (K, V) pairs.

    The numerator is accumulated pair by pair and the denominator applied
    once at the end. Stable mode maintains a running maximum and rescales
    both accumulators whenever it grows. Returns (z, row_sum).
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("q must be a non-empty vector")
    if len(k_rows) != len(v_rows) or len(k_rows) == 0:
        raise ValueError("need equal, non-zero numbers of K and V rows")
    h = q.size
    scale = _scale_for(h, scale_scores)
    num = np.zeros(h)
    den = 0.0
    if mode is NumericMode.RAW:
        with np.errstate(over="ignore", invalid="ignore"):
            for k_row, v_row in zip(k_rows, v_rows):
                k_row = np.asarray(k_row, dtype=np.float64)
                v_row = np.asarray(v_row, dtype=np.float64)
                if k_row.shape != (h,) or v_row.shape != (h,):
                    raise ValueError("every K/V row must have the same length as q")
                e = float(np.exp(float(k_row @ q) * scale))
                num += e * v_row
                den += e
        if den == 0.0 or not np.isfinite(den):
            raise NumericOverflowError(
                f"raw-mode softmax denominator is {den!r}; "
                "use stable mode or rescale the inputs")
        return num / den, den
    running_max = -np.inf
    for k_row, v_row in zip(k_rows, v_rows):
        k_row = np.asarray(k_row, dtype=np.float64)
        v_row = np.asarray(v_row, dtype=np.float64)
        if k_row.shape != (h,) or v_row.shape != (h,):
            raise ValueError("every K/V row must have the same length as q")
        s = float(k_row @ q) * scale
        if s > running_max:
            rescale = math.exp(running_max - s) if math.isfinite(running_max) else 0.0
            num *= rescale
            den *= rescale
            running_max = s
        e = math.exp(s - running_max)
        num += e * v_row
        den += e
    with np.errstate(over="ignore"):
        row_sum = float(den * np.exp(running_max))
    return num / den, row_sum


class KVFifo:
    """Fixed-size FIFO of key/value row pairs with an eviction pointer.

    Capacity is one window (2w slots). The slot for source row s is
    ``(s - w + 1) mod 2w``, so at query row i the slot ``i mod 2w`` is the
    one whose resident pair expires and is overwritten by the entering row
    ``i + w - 1``. Rows must be visited sequentially from 0.
    """

    def __init__(self, half_window: int, head_dim: int, dtype=np.float64):
        self.half_window = half_window
        cap = 2 * half_window
        self.k_buf = np.zeros((cap, head_dim), dtype=dtype)
        self.v_buf = np.zeros((cap, head_dim), dtype=dtype)
        self.source = np.full(cap, -1, dtype=np.intp)
        self.valid = np.zeros(cap, dtype=bool)
        self.evictions = 0

    @property
    def capacity(self) -> int:
        return 2 * self.half_window

    def slot_of(self, source_row: int) -> int:
        return (source_row - self.half_window + 1) % self.capacity

    def load_for_row(self, i: int, k: np.ndarray, v: np.ndarray) -> list[int]:
        """Fetch the rows of window(i) not already resident; expire the rest.

        Returns the list of source rows fetched (one K row and one V row
        each). In steady state this is just the entering row i + w - 1.
        """
        n = k.shape[0]
        w = self.half_window
        lo, hi = window_bounds(i, n, w)
        wanted = np.arange(lo, hi, dtype=np.intp)
        slots = (wanted - w + 1) % self.capacity
        missing = wanted[~(self.valid[slots] & (self.source[slots] == wanted))]
        for s in missing:
            slot = self.slot_of(int(s))
            if self.valid[slot]:
                self.evictions += 1
            self.k_buf[slot] = k[s]
            self.v_buf[slot] = v[s]
            self.source[slot] = s
            self.valid[slot] = True
        expired = self.valid & (self.source < lo)
        if expired.any():
            self.evictions += int(expired.sum())
            self.valid[expired] = False
        return [int(s) for s in missing]

    def resident(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Valid (sources, K rows, V rows), sorted by source row."""
        srcs = self.source[self.valid]
        order = np.argsort(srcs, kind="stable")
        return srcs[order], self.k_buf[self.valid][order], self.v_buf[self.valid][order]


@dataclass
class TrafficCounters:
    """Off-chip rows fetched by the streaming pass.

    ``k_rows``/``v_rows`` count fetched K and V rows over all origins;
    fetches always come in (K, V) pairs, so the two stay equal.
    ``per_row_pairs`` records the pairs fetched at each row step (global
    preloads are counted in the totals but not attributed to a row).
    """

    q_rows: int = 0
    k_rows: int = 0
    v_rows: int = 0
    window_pairs: int = 0
    global_pairs: int = 0
    random_pairs: int = 0
    per_row_pairs: list[int] = field(default_factory=list)

    def count_pairs(self, count: int, origin: str) -> None:
        self.k_rows += count
        self.v_rows += count
        if origin == "window":
            self.window_pairs += count
        elif origin == "global":
            self.global_pairs += count
        elif origin == "random":
            self.random_pairs += count
        else:
            raise ValueError(f"unknown fetch origin {origin!r}")


def streaming_window_attention(Q, K, V, config: AttentionConfig):
    """Row-by-row windowed attention over a fixed-size K/V FIFO.

    Walks query rows in order, keeping the 2w window pairs in a FIFO
    (each K/V row of the sequence is fetched exactly once), the global
    pairs pinned after a single preload, and the per-row random pairs in
    slots refreshed on every row. Returns (Z, TrafficCounters); Z equals
    ``masked_dense_attention`` over ``build_attend_sets(config)`` within
    the mode's tolerance.
    """
    q, k, v = as_array(Q), as_array(K), as_array(V)
    n, h = _check_qkv(q, k, v)
    if (n, h) != (config.seq_len, config.head_dim):
        raise ValueError(
            f"matrices are {n}x{h} but config says {config.seq_len}x{config.head_dim}")
    w = config.half_window
    scale = _scale_for(h, config.scale_scores)
    traffic = TrafficCounters()
    fifo = KVFifo(w, h, dtype=q.dtype)

    globals_ = np.asarray(config.global_tokens, dtype=np.intp)
    gk = k[globals_].copy()
    gv = v[globals_].copy()
    traffic.count_pairs(len(globals_), "global")

    r = config.random_per_row
    z = np.zeros_like(q)
    for i in range(n):
        fetched = fifo.load_for_row(i, k, v)
        traffic.q_rows += 1
        traffic.count_pairs(len(fetched), "window")
        pairs = len(fetched)

        srcs, kblk, vblk = fifo.resident()
        lo, hi = window_bounds(i, n, w)
        outside = (globals_ < lo) | (globals_ >= hi)
        if outside.any():
            srcs = np.concatenate([srcs, globals_[outside]])
            kblk = np.concatenate([kblk, gk[outside]])
            vblk = np.concatenate([vblk, gv[outside]])
        if r:
            ridx = np.asarray(
                random_indices(i, config.random_seed, r, n,
                               set(range(lo, hi)) | set(config.global_tokens)),
                dtype=np.intp)
            traffic.count_pairs(r, "random")
            pairs += r
            srcs = np.concatenate([srcs, ridx])
            kblk = np.concatenate([kblk, k[ridx]])
            vblk = np.concatenate([vblk, v[ridx]])
        order = np.argsort(srcs, kind="stable")
        z[i], _ = _fused_block(q[i], kblk[order], vblk[order], config.mode, scale, row=i)
        traffic.per_row_pairs.append(pairs)
    return DenseMatrix(z), traffic


@dataclass
class SlidingChunksResult:
    z: DenseMatrix
    mac_count: int
    redundant_mac_count: int
    plan: ChunkPlan

    @property
    def redundancy_ratio(self) -> Fraction:
        return Fraction(self.redundant_mac_count, self.mac_count)


def _band_mask(n: int, w: int) -> np.ndarray:
    rows = np.arange(n)[:, None]
    cols = np.arange(n)[None, :]
    return (cols >= rows - w) & (cols <= rows + w - 1)


def _sliding_chunks_core(q, k, v, w: int, n_real: int, scale: float) -> SlidingChunksResult:
    n, h = q.shape
    plan = sliding_chunks_plan(n, w)
    width = plan.chunk_width

    # Chunked QK: identical overlap entries land twice; values agree bitwise.
    scores = np.full((n, n), -np.inf)
    for span in plan.chunks:
        scores[span.start:span.stop, span.start:span.stop] = \
            (q[span.start:span.stop] @ k[span.start:span.stop].T) * scale

    band = _band_mask(n, w)
    band[:, n_real:] = False
    band[n_real:, :] = False
    scores[~band] = -np.inf

    probs = np.zeros((n, n))
    live = scores[:n_real]
    e = np.exp(live - live.max(axis=1, keepdims=True))
    probs[:n_real] = e / e.sum(axis=1, keepdims=True)

    # Chunked SV with single ownership of every band entry; MACs counted per
    # real query row, masked entries (corners, overlap duplicates, padding)
    # are the redundant ones.
    z = np.zeros((n, h))
    owned = np.zeros((n, n), dtype=bool)
    mac = 0
    redundant = 0
    for span in plan.chunks:
        sl = slice(span.start, span.stop)
        useful = band[sl, sl] & ~owned[sl, sl]
        owned[sl, sl] |= band[sl, sl]
        block = np.where(useful, probs[sl, sl], 0.0)
        z[sl] += block @ v[sl]
        real_rows = max(0, min(span.stop, n_real) - span.start)
        mac += 2 * h * real_rows * width
        redundant += 2 * h * int((~useful[:real_rows]).sum())
    return SlidingChunksResult(DenseMatrix(z[:n_real]), mac, redundant, plan)


def sliding_chunks_attention(Q, K, V, w: int, scale_scores: bool = False) -> SlidingChunksResult:
    """Windowed attention via overlapping 2w-wide dense chunks.

    Covers the band with 2w x 2w dense products at stride w (N/w - 1
    chunks), masks corner and overlap-duplicate entries before the softmax,
    and counts every chunk MAC plus the masked (redundant) ones. The output
    equals ``masked_dense_attention`` over the window sets. N must be a
    multiple of w and at least 2w; otherwise pad first (see
    :func:`padded_sliding_chunks_attention`).
    """
    q, k, v = as_array(Q), as_array(K), as_array(V)
    n, h = _check_qkv(q, k, v)
    return _sliding_chunks_core(q, k, v, w, n, _scale_for(h, scale_scores))


def padded_sliding_chunks_attention(Q, K, V, w: int, scale_scores: bool = False) -> SlidingChunksResult:
    """Chunked attention for sequence lengths that are not multiples of w.

    Pads Q/K/V with zero rows up to max(2w, next multiple of w), masks the
    padded columns, discards the padded rows' outputs, and excludes the
    padded query rows from both MAC counters.
    """
    q, k, v = as_array(Q), as_array(K), as_array(V)
    n, h = _check_qkv(q, k, v)
    target = max(2 * w, -(-n // w) * w)
    pad = target - n
    if pad:
        fill = np.zeros((pad, h), dtype=q.dtype)
        q, k, v = (np.concatenate([m, fill]) for m in (q, k, v))
    return _sliding_chunks_core(q, k, v, w, n, _scale_for(h, scale_scores))
