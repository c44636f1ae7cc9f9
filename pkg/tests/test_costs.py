"""Analytical cost model formulas and trends."""

import io

import numpy as np
import pytest

from winattn import (
    AttnKind,
    EnergySpec,
    ModelDims,
    chunk_redundancy_ratio,
    cost_sweep,
    energy_per_attention,
    energy_ratio,
    flops_breakdown,
    memory_peak,
)
from winattn.costs import chunk_count_for, write_reports_csv

DIMS = ModelDims(d_model=768, heads=12, head_dim=64, ffn_mult=4.0)
GRID = (128, 256, 512, 1024, 2048, 4096, 8192, 16384)


def test_dims_validation():
    with pytest.raises(ValueError):
        ModelDims(d_model=768, heads=10, head_dim=64)


def test_flops_formulas_direct():
    r = flops_breakdown(DIMS, 1024, AttnKind.DENSE)
    d = 768
    assert r.flops["linear"] == 8 * 1024 * d * d
    assert r.flops["ffn"] == 4 * 4.0 * 1024 * d * d
    assert r.flops["attention"] == 4 * 1024 * 1024 * d
    rw = flops_breakdown(DIMS, 1024, AttnKind.WINDOW, half_window=256)
    assert rw.flops["attention"] == 4 * 1024 * 512 * d


def test_dense_attention_share_strictly_increasing():
    shares = [flops_breakdown(DIMS, n, AttnKind.DENSE).flops_share("attention") for n in GRID]
    assert all(b > a for a, b in zip(shares, shares[1:]))


def test_window_share_constant_in_n():
    shares = [flops_breakdown(DIMS, n, AttnKind.WINDOW, half_window=64).flops_share("attention")
              for n in GRID]
    assert max(shares) - min(shares) < 1e-12


def test_chunks_approach_twice_window_flops():
    w = 64
    ratios = []
    for n in (256, 1024, 8192, 65536):
        chunks = flops_breakdown(DIMS, n, AttnKind.SLIDING_CHUNKS, half_window=w)
        window = flops_breakdown(DIMS, n, AttnKind.WINDOW, half_window=w)
        ratios.append(chunks.flops["attention"] / window.flops["attention"])
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 2.0) < 2e-3
    c = chunk_count_for(65536, w)
    assert ratios[-1] == 1.0 / (1.0 - float(chunk_redundancy_ratio(c)))


def test_window_equals_dense_at_full_window():
    n = 2048
    dense = flops_breakdown(DIMS, n, AttnKind.DENSE)
    window = flops_breakdown(DIMS, n, AttnKind.WINDOW, half_window=n // 2)
    assert window.flops["attention"] == dense.flops["attention"]


def test_memory_dense_s_matrix_dominates():
    peak = memory_peak(AttnKind.DENSE, 16384, 64, 64, 4)
    assert peak - 3 * 16384 * 64 * 4 == 2**30  # the score matrix alone is 1 GiB


def test_memory_window_linear_in_n():
    w, h, b = 64, 64, 4
    peaks = [memory_peak(AttnKind.WINDOW, n, w, h, b) for n in GRID]
    slopes = {(peaks[i + 1] - peaks[i]) / (GRID[i + 1] - GRID[i]) for i in range(len(peaks) - 1)}
    assert slopes == {3 * h * b}


def test_memory_dense_over_window_ratio_increasing():
    ratios = [memory_peak(AttnKind.DENSE, n, 64, 64, 4) / memory_peak(AttnKind.WINDOW, n, 64, 64, 4)
              for n in GRID]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_mops_attention_dominance_grows_for_dense():
    shares = [flops_breakdown(DIMS, n, AttnKind.DENSE).mops_share("attention") for n in GRID]
    assert all(b > a for a, b in zip(shares, shares[1:]))


def test_energy_reference_value():
    spec = EnergySpec("fpga-200mhz-30w", 200e6, 30.0)
    joules = energy_per_attention(823_999, spec)
    assert joules == pytest.approx(0.12359985, rel=1e-12)
    assert abs(joules - 0.1236) < 1e-4


def test_energy_linear_in_power():
    a = EnergySpec("a", 1e9, 10.0)
    b = EnergySpec("b", 1e9, 20.0)
    assert energy_per_attention(1000, b) == 2 * energy_per_attention(1000, a)


def test_energy_ratio_is_joules_ratio():
    a = EnergySpec("fpga", 200e6, 30.0)
    b = EnergySpec("gpu", 1.7e9, 300.0)
    ja = energy_per_attention(823_999, a)
    jb = energy_per_attention(500_000, b)
    assert energy_ratio(823_999, a, 500_000, b) == pytest.approx(ja / jb, rel=1e-12)


def test_batch_multiplication_scales_all_fields():
    one = flops_breakdown(DIMS, 512, AttnKind.DENSE, batch=1)
    four = flops_breakdown(DIMS, 512, AttnKind.DENSE, batch=4)
    for comp in ("linear", "attention", "ffn"):
        assert four.flops[comp] == 4 * one.flops[comp]
        assert four.mops[comp] == 4 * one.mops[comp]
    assert four.peak_memory_bytes == 4 * one.peak_memory_bytes
    assert four.offchip_bytes == 4 * one.offchip_bytes


def test_sweep_shape_and_csv():
    reports = cost_sweep(DIMS, GRID, half_window=64)
    assert len(reports) == len(GRID) * 3
    keys = [(r.seq_len, r.kind.value) for r in reports]
    assert keys == sorted(keys)
    chunks = [r for r in reports if r.kind is AttnKind.SLIDING_CHUNKS]
    for r in chunks:
        assert r.redundancy_ratio == chunk_redundancy_ratio(chunk_count_for(r.seq_len, 64))
    buf = io.StringIO()
    write_reports_csv(reports, buf)
    lines = buf.getvalue().strip().splitlines()
    assert len(lines) == 1 + len(reports)
    assert lines[0].startswith("seq_len,kind,half_window,flops_linear")


def test_linear_fit_quality_of_memory_columns():
    # the windowed (streaming) memory column is exactly linear in N; the
    # dense column needs the quadratic term
    ns = np.array(GRID, dtype=float)
    window = np.array([memory_peak(AttnKind.WINDOW, n, 64, 64, 4) for n in GRID], dtype=float)
    dense = np.array([memory_peak(AttnKind.DENSE, n, 64, 64, 4) for n in GRID], dtype=float)

    def r_squared(x, y, deg):
        coeffs = np.polyfit(x, y, deg)
        fit = np.polyval(coeffs, x)
        ss_res = float(((y - fit) ** 2).sum())
        ss_tot = float(((y - y.mean()) ** 2).sum())
        return 1.0 - ss_res / ss_tot

    assert r_squared(ns, window, 1) > 0.9999
    assert r_squared(ns, dense, 2) > 0.9999
    assert r_squared(ns, dense, 1) < 0.999
