"""Windowed-attention numerics, pipeline co-simulation and cost models."""

from .config import AttentionConfig, NumericMode
from .costs import (
    AttnKind,
    CostReport,
    EnergySpec,
    ModelDims,
    cost_sweep,
    energy_per_attention,
    energy_ratio,
    flops_breakdown,
    memory_peak,
)
from .errors import NumericOverflowError
from .matrices import DenseMatrix, random_qkv
from .numerics import (
    KVFifo,
    SlidingChunksResult,
    TrafficCounters,
    dense_attention,
    fused_row_attention,
    masked_dense_attention,
    max_relative_error,
    padded_sliding_chunks_attention,
    sliding_chunks_attention,
    softmax_row,
    streaming_window_attention,
)
from .patterns import (
    AttendSet,
    ChunkPlan,
    Provenance,
    attend_sets_from_json,
    attend_sets_to_json,
    build_attend_sets,
    chunk_redundancy_ratio,
    random_indices,
    sliding_chunks_plan,
    window_attend_set,
)
from .pipeline import (
    AttentionCoreState,
    CoreArray,
    LoadResult,
    PipelineTiming,
    SimTrace,
    default_timing,
    init_cores,
    load_stage,
    preload_global_cores,
    simulate_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "AttendSet",
    "AttentionConfig",
    "AttentionCoreState",
    "AttnKind",
    "ChunkPlan",
    "CoreArray",
    "CostReport",
    "DenseMatrix",
    "EnergySpec",
    "KVFifo",
    "LoadResult",
    "ModelDims",
    "NumericMode",
    "NumericOverflowError",
    "PipelineTiming",
    "Provenance",
    "SimTrace",
    "SlidingChunksResult",
    "TrafficCounters",
    "attend_sets_from_json",
    "attend_sets_to_json",
    "build_attend_sets",
    "chunk_redundancy_ratio",
    "cost_sweep",
    "default_timing",
    "dense_attention",
    "energy_per_attention",
    "energy_ratio",
    "flops_breakdown",
    "fused_row_attention",
    "init_cores",
    "load_stage",
    "masked_dense_attention",
    "max_relative_error",
    "memory_peak",
    "padded_sliding_chunks_attention",
    "preload_global_cores",
    "random_indices",
    "random_qkv",
    "simulate_sequence",
    "sliding_chunks_attention",
    "sliding_chunks_plan",
    "softmax_row",
    "streaming_window_attention",
    "window_attend_set",
]
