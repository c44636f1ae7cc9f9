"""Cycle-level model of the input-stationary windowed-attention pipeline.

The datapath is an array of attention cores, each holding one stationary
K row and its paired V row; a query row is broadcast to all cores, which
compute their score exponential and value slice locally before two parallel
reduction trees and a final division stage. Execution is modeled at
transaction level with cycle annotations: per-row functional results are
computed exactly, and stage timing is advanced by whole stage latencies
through a discrete-event schedule of the six-deep pipeline
LOAD -> QK -> SV -> {ZRED1 || ROWSUM1} -> {ZRED2 || ROWSUM2} -> DIV&OUT.

Default stage latencies reproduce the synthesized fp16 reference design
(head dim 64, 512 cores); other shapes use a linear-in-depth model with
constants fitted at that reference point, so they are estimates rather
than synthesis results.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .config import AttentionConfig
from .matrices import DenseMatrix, as_array
from .numerics import TrafficCounters, _check_qkv, _fused_block, _scale_for
from .patterns import random_indices, window_bounds

STAGE_LOAD = "load"
STAGE_QK = "qk"
STAGE_SV = "sv"
STAGE_ZRED1 = "zred1"
STAGE_ROWSUM1 = "rowsum1"
STAGE_ZRED2 = "zred2"
STAGE_ROWSUM2 = "rowsum2"
STAGE_DIV_OUT = "div_out"

# Pipeline order; parallel pairs advance together.
SUPER_STAGES = (
    (STAGE_LOAD,),
    (STAGE_QK,),
    (STAGE_SV,),
    (STAGE_ZRED1, STAGE_ROWSUM1),
    (STAGE_ZRED2, STAGE_ROWSUM2),
    (STAGE_DIV_OUT,),
)
STAGE_ORDER = tuple(s for group in SUPER_STAGES for s in group)

_MAC_II = {"fp16": 3, "fp32": 4}
_QK_OVERHEAD = {"fp16": 9, "fp32": 8}
_SV_OVERHEAD = 5
_RED1_OVERHEAD = 3
_ZRED2_OVERHEAD = 42
_ROWSUM2_OVERHEAD = 3
_DIV_II = 2
_DIV_OVERHEAD = 51
DEFAULT_LOAD_CYCLES = 66
RANDOM_LOAD_CYCLES = 195


@dataclass(frozen=True)
class PipelineTiming:
    """Per-stage latencies in cycles.

    ``load`` is the steady window-refresh latency (also the first row's
    fill); ``random_load`` replaces it on rows >= 1 when per-row random
    refresh is active, the first row's random/global buffers being part of
    the static preload.
    """

    load: int
    qk: int
    sv: int
    zred1: int
    zred2: int
    rowsum1: int
    rowsum2: int
    div_out: int
    mac_ii: int
    precision: str = "fp16"
    random_load: int = RANDOM_LOAD_CYCLES

    @property
    def initiation_interval(self) -> int:
        """Cycles between successive query rows accepted by the pipeline."""
        return max(self.load, self.qk, self.sv,
                   max(self.zred1, self.rowsum1),
                   max(self.zred2, self.rowsum2),
                   self.div_out)

    @property
    def fill_cycles(self) -> int:
        """First row's traversal: sum of stage latencies along the chain."""
        return (self.load + self.qk + self.sv
                + max(self.zred1, self.rowsum1)
                + max(self.zred2, self.rowsum2)
                + self.div_out)

    def stage_latencies(self) -> dict[str, int]:
        return {
            STAGE_LOAD: self.load, STAGE_QK: self.qk, STAGE_SV: self.sv,
            STAGE_ZRED1: self.zred1, STAGE_ROWSUM1: self.rowsum1,
            STAGE_ZRED2: self.zred2, STAGE_ROWSUM2: self.rowsum2,
            STAGE_DIV_OUT: self.div_out,
        }

    def with_overrides(self, **kwargs) -> "PipelineTiming":
        return replace(self, **kwargs)


def default_timing(precision: str = "fp16", head_dim: int = 64,
                   half_window: int = 256, core_count: int | None = None) -> PipelineTiming:
    """Stage latencies for a given precision and shape.

    At the fp16 reference shape (head_dim=64, 512 cores) this returns the
    synthesized latencies exactly; elsewhere each stage scales as
    mac_ii * depth + a constant fitted at the reference point. The MAC
    initiation interval is 3 cycles in fp16 and 4 in fp32, which puts the
    fp32 reference QK stage (and hence the pipeline II) at 264 cycles.
    """
    if precision not in _MAC_II:
        raise ValueError(f"precision must be one of {sorted(_MAC_II)}, got {precision!r}")
    if head_dim < 1 or half_window < 1:
        raise ValueError("head_dim and half_window must be >= 1")
    cores = 2 * half_window if core_count is None else core_count
    mac = _MAC_II[precision]
    group = min(cores, head_dim)
    groups = math.ceil(cores / head_dim)
    return PipelineTiming(
        load=DEFAULT_LOAD_CYCLES,
        qk=mac * head_dim + _QK_OVERHEAD[precision],
        sv=mac * head_dim + _SV_OVERHEAD,
        zred1=mac * group + _RED1_OVERHEAD,
        rowsum1=mac * group + _RED1_OVERHEAD,
        zred2=mac * groups + _ZRED2_OVERHEAD,
        rowsum2=mac * groups + _ROWSUM2_OVERHEAD,
        div_out=_DIV_II * head_dim + _DIV_OVERHEAD,
        mac_ii=mac,
        precision=precision,
    )


class PinKind(Enum):
    NONE = "none"
    GLOBAL = "global"
    RANDOM = "random"


@dataclass
class AttentionCoreState:
    """Snapshot of one attention core: its stationary (K, V) pair and the
    score exponential / output slice it produced for the last query row."""

    core_id: int
    k_buf: np.ndarray
    v_buf: np.ndarray
    source_row: int | None
    valid: bool
    s_prime: float | None
    z_slice: np.ndarray | None
    pinned: PinKind


class CoreArray:
    """All attention cores of one pipeline, stored as parallel arrays.

    Layout: window cores fill slots [0, 2w) (slot of source row s is
    (s - w + 1) mod 2w, so query row i overwrites slot i mod 2w), followed
    by the pinned global cores and then the per-row random cores.
    """

    def __init__(self, config: AttentionConfig, dtype=np.float64):
        self.config = config
        c = config.core_count
        h = config.head_dim
        self.k_buf = np.zeros((c, h), dtype=dtype)
        self.v_buf = np.zeros((c, h), dtype=dtype)
        self.source = np.full(c, -1, dtype=np.intp)
        self.valid = np.zeros(c, dtype=bool)
        self.s_prime = np.full(c, np.nan)
        self.z_slices = np.zeros((c, h))
        w2 = config.window_size
        g = len(config.global_tokens)
        self.window_slots = slice(0, w2)
        self.global_slots = slice(w2, w2 + g)
        self.random_slots = slice(w2 + g, c)

    def __len__(self) -> int:
        return self.config.core_count

    @property
    def allocation(self) -> dict[str, int]:
        return {
            "window": self.config.window_size,
            "global": len(self.config.global_tokens),
            "random": self.config.random_per_row,
        }

    def pin_kind(self, core_id: int) -> PinKind:
        if core_id < self.window_slots.stop:
            return PinKind.NONE
        if core_id < self.global_slots.stop:
            return PinKind.GLOBAL
        return PinKind.RANDOM

    def window_slot(self, source_row: int) -> int:
        w = self.config.half_window
        return (source_row - w + 1) % self.config.window_size

    def core(self, core_id: int) -> AttentionCoreState:
        valid = bool(self.valid[core_id])
        return AttentionCoreState(
            core_id=core_id,
            k_buf=self.k_buf[core_id].copy(),
            v_buf=self.v_buf[core_id].copy(),
            source_row=int(self.source[core_id]) if valid else None,
            valid=valid,
            s_prime=float(self.s_prime[core_id]) if not np.isnan(self.s_prime[core_id]) else None,
            z_slice=self.z_slices[core_id].copy(),
            pinned=self.pin_kind(core_id),
        )

    def valid_window_sources(self) -> np.ndarray:
        sl = self.window_slots
        srcs = self.source[sl][self.valid[sl]]
        return np.sort(srcs)


def init_cores(config: AttentionConfig, dtype=np.float64) -> CoreArray:
    """Allocate 2w window cores, one pinned core per global token and one
    core per random token; all invalid until the first loads."""
    return CoreArray(config, dtype=dtype)


def preload_global_cores(cores: CoreArray, K, V) -> int:
    """Fill the pinned global cores once, before the row loop.

    Returns the number of source rows fetched (one K and one V row each).
    """
    k, v = as_array(K), as_array(V)
    globals_ = cores.config.global_tokens
    for j, g in enumerate(globals_):
        cid = cores.global_slots.start + j
        cores.k_buf[cid] = k[g]
        cores.v_buf[cid] = v[g]
        cores.source[cid] = g
        cores.valid[cid] = True
    return len(globals_)


@dataclass
class LoadResult:
    """What the LOAD step of one row did."""

    row: int
    window_fetched: tuple[int, ...]
    random_fetched: tuple[int, ...]
    evicted_core: int | None

    @property
    def fetch_count(self) -> int:
        return len(self.window_fetched) + len(self.random_fetched)


def load_stage(i: int, cores: CoreArray, K, V, config: AttentionConfig) -> LoadResult:
    """Refresh core buffers for query row i.

    Steady state replaces exactly one window core (slot i mod 2w, whose
    resident pair expires) with the entering row i + w - 1, and refreshes
    every random core from the row's static draw; global cores are never
    touched. Row 0 performs the initial window fill. Entering rows outside
    [0, N) invalidate the slot instead of fetching. Rows must be visited
    sequentially from 0.
    """
    k, v = as_array(K), as_array(V)
    n, w = config.seq_len, config.half_window
    if not 0 <= i < n:
        raise ValueError(f"row {i} out of range [0, {n})")
    lo, hi = window_bounds(i, n, w)
    evicted = None
    window_fetched: list[int] = []
    if i == 0:
        for s in range(lo, hi):
            slot = cores.window_slot(s)
            cores.k_buf[slot] = k[s]
            cores.v_buf[slot] = v[s]
            cores.source[slot] = s
            cores.valid[slot] = True
            window_fetched.append(s)
    else:
        slot = i % config.window_size
        entering = i + w - 1
        if entering < n:
            if cores.valid[slot]:
                evicted = slot
            cores.k_buf[slot] = k[entering]
            cores.v_buf[slot] = v[entering]
            cores.source[slot] = entering
            cores.valid[slot] = True
            window_fetched.append(entering)
        elif cores.valid[slot]:
            cores.valid[slot] = False
            evicted = slot
    random_fetched: list[int] = []
    if config.random_per_row:
        ridx = random_indices(i, config.random_seed, config.random_per_row, n,
                              set(range(lo, hi)) | set(config.global_tokens))
        for j, s in enumerate(ridx):
            cid = cores.random_slots.start + j
            cores.k_buf[cid] = k[s]
            cores.v_buf[cid] = v[s]
            cores.source[cid] = s
            cores.valid[cid] = True
            random_fetched.append(s)
    return LoadResult(i, tuple(window_fetched), tuple(random_fetched), evicted)


@dataclass
class StageEvent:
    row: int
    stage: str
    start: int
    end: int


@dataclass
class RowRecord:
    row: int
    evicted_core: int | None
    window_fetches: int
    random_fetches: int


@dataclass
class SimTrace:
    """Cycle-annotated record of one simulated sequence."""

    seq_len: int
    timing: PipelineTiming
    events: list[StageEvent]
    row_records: list[RowRecord]
    total_cycles: int
    fill_cycles: int
    initiation_interval: int
    closed_form_cycles: int
    core_allocation: dict[str, int]
    traffic: TrafficCounters
    evictions: int

    def summary(self) -> dict:
        return {
            "seq_len": self.seq_len,
            "precision": self.timing.precision,
            "stage_latencies": self.timing.stage_latencies(),
            "mac_ii": self.timing.mac_ii,
            "initiation_interval": self.initiation_interval,
            "fill_cycles": self.fill_cycles,
            "total_cycles": self.total_cycles,
            "closed_form_cycles": self.closed_form_cycles,
            "core_allocation": dict(self.core_allocation),
            "fetches": {
                "q_rows": self.traffic.q_rows,
                "k_rows": self.traffic.k_rows,
                "v_rows": self.traffic.v_rows,
                "window_pairs": self.traffic.window_pairs,
                "global_pairs": self.traffic.global_pairs,
                "random_pairs": self.traffic.random_pairs,
            },
            "evictions": self.evictions,
        }

    def to_csv(self, fileobj) -> None:
        """One record per row-stage event: row, stage, start_cycle, end_cycle."""
        writer = csv.writer(fileobj)
        writer.writerow(["row", "stage", "start_cycle", "end_cycle"])
        stage_rank = {s: j for j, s in enumerate(STAGE_ORDER)}
        for ev in sorted(self.events, key=lambda e: (e.row, stage_rank[e.stage])):
            writer.writerow([ev.row, ev.stage, ev.start, ev.end])

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _schedule(n_rows: int, latency_of) -> tuple[list[StageEvent], int]:
    """Discrete-event pass of the pipeline: each stage is a resource that
    holds one row for its latency; parallel pair members start together."""
    busy = {s: 0 for s in STAGE_ORDER}
    events: list[StageEvent] = []
    total = 0
    for i in range(n_rows):
        prev_end = 0
        for members in SUPER_STAGES:
            start = max([prev_end] + [busy[m] for m in members])
            group_end = start
            for m in members:
                end = start + latency_of(i, m)
                busy[m] = end
                events.append(StageEvent(i, m, start, end))
                group_end = max(group_end, end)
            prev_end = group_end
        total = prev_end
    return events, total


def simulate_sequence(Q, K, V, config: AttentionConfig,
                      timing: PipelineTiming | None = None):
    """Run the full pipeline over a sequence.

    Returns (Z, SimTrace). The functional result matches
    ``streaming_window_attention`` for the same config (same gather order,
    same kernel), and the event-driven total satisfies
    ``fill + (N - 1) * II`` whenever no steady-state stage exceeds the II.
    """
    q, k, v = as_array(Q), as_array(K), as_array(V)
    n, h = _check_qkv(q, k, v)
    if (n, h) != (config.seq_len, config.head_dim):
        raise ValueError(
            f"matrices are {n}x{h} but config says {config.seq_len}x{config.head_dim}")
    if timing is None:
        timing = default_timing("fp16", head_dim=h, half_window=config.half_window,
                                core_count=config.core_count)
    scale = _scale_for(h, config.scale_scores)
    w = config.half_window
    globals_ = np.asarray(config.global_tokens, dtype=np.intp)

    cores = init_cores(config, dtype=q.dtype)
    traffic = TrafficCounters()
    traffic.count_pairs(preload_global_cores(cores, k, v), "global")

    z = np.zeros_like(q)
    row_records: list[RowRecord] = []
    evictions = 0
    for i in range(n):
        load = load_stage(i, cores, k, v, config)
        traffic.q_rows += 1
        traffic.count_pairs(len(load.window_fetched), "window")
        traffic.count_pairs(len(load.random_fetched), "random")
        traffic.per_row_pairs.append(load.fetch_count)
        if load.evicted_core is not None:
            evictions += 1
        row_records.append(RowRecord(i, load.evicted_core,
                                     len(load.window_fetched), len(load.random_fetched)))

        wsl = cores.window_slots
        active = np.flatnonzero(cores.valid[wsl])
        srcs = cores.source[wsl][active]
        kblk = cores.k_buf[wsl][active]
        vblk = cores.v_buf[wsl][active]
        core_ids = [active]
        lo, hi = window_bounds(i, n, w)
        if len(globals_):
            outside = np.flatnonzero((globals_ < lo) | (globals_ >= hi))
            gids = cores.global_slots.start + outside
            srcs = np.concatenate([srcs, cores.source[gids]])
            kblk = np.concatenate([kblk, cores.k_buf[gids]])
            vblk = np.concatenate([vblk, cores.v_buf[gids]])
            core_ids.append(gids)
        if config.random_per_row:
            rsl = cores.random_slots
            rids = np.arange(rsl.start, rsl.stop)
            srcs = np.concatenate([srcs, cores.source[rsl]])
            kblk = np.concatenate([kblk, cores.k_buf[rsl]])
            vblk = np.concatenate([vblk, cores.v_buf[rsl]])
            core_ids.append(rids)
        order = np.argsort(srcs, kind="stable")
        zi, row_sum, e = _fused_block(q[i], kblk[order], vblk[order],
                                      config.mode, scale, row=i, return_exponentials=True)
        z[i] = zi
        contributing = np.concatenate(core_ids)[order]
        cores.s_prime.fill(np.nan)
        cores.z_slices.fill(0.0)
        cores.s_prime[contributing] = e
        cores.z_slices[contributing] = e[:, None] * vblk[order]

    steady_load = timing.random_load if config.random_per_row else timing.load
    ii = max(timing.initiation_interval, steady_load)
    fill = timing.fill_cycles
    closed_form = fill + (n - 1) * ii

    def latency_of(row: int, stage: str) -> int:
        if stage == STAGE_LOAD:
            return timing.load if row == 0 else steady_load
        return timing.stage_latencies()[stage]

    events, total = _schedule(n, latency_of)
    trace = SimTrace(
        seq_len=n,
        timing=timing,
        events=events,
        row_records=row_records,
        total_cycles=total,
        fill_cycles=fill,
        initiation_interval=ii,
        closed_form_cycles=closed_form,
        core_allocation=cores.allocation,
        traffic=traffic,
        evictions=evictions,
    )
    return DenseMatrix(z), trace
