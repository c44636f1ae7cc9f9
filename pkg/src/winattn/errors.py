"""Exception types shared across the package."""

from __future__ import annotations


class NumericOverflowError(ArithmeticError):
    """Raw-exponential accumulation produced a zero or non-finite row sum.

    Raised by the fused kernel when the softmax denominator over- or
    underflows, which can only happen in raw mode; the stabilized mode
    keeps the denominator in a safe range by construction.
    """

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row
