"""Counter-based deterministic random values.

Static attention patterns and synthetic test matrices must be exactly
reproducible from a seed, across runs and across implementations in other
languages. Everything random in this package therefore derives from one
small generator whose definition is part of the on-disk format contract:

* ``mix64(x)`` is the splitmix64 finalizer over 64-bit unsigned ints::

      x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9
      x ^= x >> 27;  x *= 0x94D049BB133111EB
      x ^= x >> 31

* a *stream* is identified by a 64-bit key; its n-th value (n >= 0) is
  ``mix64(key + (n + 1) * 0x9E3779B97F4A7C15)``, i.e. splitmix64 with the
  key as initial state.

* keys are derived from a user seed and integer labels by chaining:
  ``key = mix64(seed)`` then, per label ``L``,
  ``key = mix64(key ^ (L + 0x9E3779B97F4A7C15))``.

* a stream value maps to the unit interval by taking the top 53 bits:
  ``(v >> 11) * 2**-53``, and to [-1, 1) as ``2*u - 1``.

Stream labels used by this package:

====================  =========================================
label                 purpose
====================  =========================================
``LABEL_Q/K/V``       synthetic query/key/value matrices
``LABEL_RANDOM``      random-attention column draws (then row)
====================  =========================================
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

LABEL_Q = 1
LABEL_K = 2
LABEL_V = 3
LABEL_RANDOM = 4


def mix64(x: int) -> int:
    """splitmix64 finalizer of a 64-bit unsigned integer."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def derive_key(seed: int, *labels: int) -> int:
    """Derive a stream key from a seed and a chain of integer labels."""
    key = mix64(seed)
    for label in labels:
        key = mix64(key ^ ((label + GOLDEN) & _MASK64))
    return key


def stream_value(key: int, n: int) -> int:
    """n-th 64-bit value of the stream identified by ``key``."""
    return mix64((key + (n + 1) * GOLDEN) & _MASK64)


def unit_value(v: int) -> float:
    """Map a 64-bit value to [0, 1) using its top 53 bits."""
    return (v >> 11) * 2.0**-53


def uniform_values(key: int, count: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """First ``count`` stream values mapped uniformly into [lo, hi).

    Vectorized uint64 arithmetic; identical to calling :func:`stream_value`
    and :func:`unit_value` element by element.
    """
    n = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(key) + n * np.uint64(GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
        x ^= x >> np.uint64(31)
    u = (x >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return lo + (hi - lo) * u
