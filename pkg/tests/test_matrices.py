"""DenseMatrix container contract and deterministic matrix generation."""

import numpy as np
import pytest

from winattn import DenseMatrix, random_qkv
from winattn.numerics import KVFifo


def test_rejects_non_2d():
    with pytest.raises(ValueError):
        DenseMatrix([1.0, 2.0])


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        DenseMatrix([[1.0, np.inf]])
    with pytest.raises(ValueError):
        DenseMatrix([[np.nan]])


def test_from_flat_checks_length():
    m = DenseMatrix.from_flat(2, 3, [1, 2, 3, 4, 5, 6])
    assert m.shape == (2, 3)
    assert m.data[1, 2] == 6.0
    with pytest.raises(ValueError):
        DenseMatrix.from_flat(2, 3, [1, 2, 3])


def test_uniform_deterministic_and_bounded():
    a = DenseMatrix.uniform(8, 4, seed=5, label=1)
    b = DenseMatrix.uniform(8, 4, seed=5, label=1)
    c = DenseMatrix.uniform(8, 4, seed=5, label=2)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    assert np.all(a.data >= -1.0) and np.all(a.data < 1.0)


def test_random_qkv_distinct_roles():
    q, k, v = random_qkv(7, 6, 3)
    assert q.shape == k.shape == v.shape == (6, 3)
    assert not np.array_equal(q.data, k.data)
    assert not np.array_equal(k.data, v.data)


def test_single_precision_option():
    q = DenseMatrix.uniform(4, 4, seed=1, label=1, dtype=np.float32)
    assert q.data.dtype == np.float32


def test_numpy_interop():
    m = DenseMatrix([[1.0, 2.0], [3.0, 4.0]])
    assert np.asarray(m).sum() == 10.0
    assert m.row(1).tolist() == [3.0, 4.0]
    assert m.rows == 2 and m.cols == 2


def test_kvfifo_slot_arithmetic_and_evictions():
    q, k, v = random_qkv(9, 12, 4)
    fifo = KVFifo(half_window=2, head_dim=4)
    assert fifo.capacity == 4
    fetched = fifo.load_for_row(0, k.data, v.data)
    assert fetched == [0, 1]
    assert fifo.evictions == 0
    for i in range(1, 12):
        fifo.load_for_row(i, k.data, v.data)
    srcs, kb, vb = fifo.resident()
    assert srcs.tolist() == [9, 10, 11]
    assert np.array_equal(kb, k.data[9:12])
    assert np.array_equal(vb, v.data[9:12])
    assert fifo.evictions > 0
