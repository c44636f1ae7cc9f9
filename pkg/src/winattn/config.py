"""Attention configuration and numeric-mode selection."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class NumericMode(Enum):
    """How the fused kernel exponentiates scores.

    RAW applies ``exp`` directly to each score, matching the post-fusion
    formulation (and the FP16 hardware datapath) literally; it overflows
    once scores leave the representable range of ``exp``.  STABLE keeps a
    running maximum, exponentiates shifted scores and rescales the
    accumulators, so any finite scores normalize safely.
    """

    RAW = "raw"
    STABLE = "stable"


@dataclass(frozen=True)
class AttentionConfig:
    """Static description of one attention computation.

    ``half_window`` is w; each row attends to the 2w candidate columns
    {i-w, ..., i+w-1} clipped to [0, N), plus the configured global tokens
    and ``random_per_row`` statically drawn random tokens.
    """

    seq_len: int
    head_dim: int
    half_window: int
    global_tokens: tuple[int, ...] = ()
    random_per_row: int = 0
    random_seed: int = 0
    scale_scores: bool = False
    mode: NumericMode = NumericMode.STABLE

    def __post_init__(self):
        n, h, w = self.seq_len, self.head_dim, self.half_window
        if n < 1 or h < 1 or w < 1:
            raise ValueError("seq_len, head_dim and half_window must be >= 1")
        object.__setattr__(self, "global_tokens", tuple(sorted(self.global_tokens)))
        if len(set(self.global_tokens)) != len(self.global_tokens):
            raise ValueError("global_tokens must be unique")
        if self.global_tokens and not (0 <= self.global_tokens[0] and self.global_tokens[-1] < n):
            raise ValueError("global token indices must lie in [0, seq_len)")
        if self.random_per_row < 0:
            raise ValueError("random_per_row must be >= 0")
        # Windows larger than the sequence just truncate; the binding limit
        # is that every row must still have room for its random draws.
        if self.random_per_row + len(self.global_tokens) + min(2 * w, n) > n:
            raise ValueError("window, global and random tokens together exceed seq_len")
        if not isinstance(self.mode, NumericMode):
            raise ValueError(f"mode must be a NumericMode, got {self.mode!r}")

    @property
    def window_size(self) -> int:
        return 2 * self.half_window

    @property
    def core_count(self) -> int:
        """Total attention cores: window + pinned-global + random."""
        return self.window_size + len(self.global_tokens) + self.random_per_row
