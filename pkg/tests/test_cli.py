"""CLI behavior: commands, config handling, exit codes, determinism."""

import json

import pytest

from winattn.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_verify_default_passes(capsys):
    code, out, _ = run(capsys, "verify", "--draws", "2")
    assert code == 0
    assert "streaming vs masked-dense" in out
    assert "sliding-chunks vs masked-dense" in out


def test_verify_raw_scaled_inputs_overflow(capsys):
    code, out, _ = run(capsys, "verify", "--mode", "raw", "--input-scale", "50", "--draws", "1")
    assert code == 1
    assert "overflow at row" in out


def test_verify_reports_offending_triple_on_breach(capsys, monkeypatch):
    import winattn.cli as cli
    from winattn import NumericMode

    monkeypatch.setitem(cli.STREAM_TOLERANCE, NumericMode.STABLE, 1e-22)
    code, out, _ = run(capsys, "verify", "--seq-len", "64", "--head-dim", "8",
                       "--half-window", "4", "--draws", "1")
    assert code == 1
    assert "FAIL" in out and "N=64, w=4, seed=7" in out


def test_verify_full_window_matches_oracle(capsys):
    code, out, _ = run(capsys, "verify", "--seq-len", "8", "--head-dim", "4",
                       "--half-window", "4", "--draws", "2")
    assert code == 0


def test_verify_writes_report(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, _, _ = run(capsys, "verify", "--draws", "1", "--format", "json",
                     "--out", str(out_path))
    assert code == 0
    records = json.loads(out_path.read_text())
    assert records[0]["seq_len"] == 256
    assert records[0]["stream_vs_masked"] <= 1e-10


def test_simulate_reference_summary(tmp_path, capsys):
    base = tmp_path / "run"
    code, out, _ = run(capsys, "simulate", "--seq-len", "4096", "--head-dim", "64",
                       "--half-window", "256", "--out", str(base))
    assert code == 0
    assert "total_cycles=823999" in out
    summary = json.loads((tmp_path / "run.summary.json").read_text())
    assert summary["total_cycles"] == 823999
    assert summary["initiation_interval"] == 201
    assert summary["fill_cycles"] == 904
    assert summary["fetches"]["k_rows"] == 4096
    trace_lines = (tmp_path / "run.trace.csv").read_text().strip().splitlines()
    assert trace_lines[0] == "row,stage,start_cycle,end_cycle"
    assert len(trace_lines) == 1 + 4096 * 8


def test_simulate_fp32_ii(capsys):
    code, out, _ = run(capsys, "simulate", "--seq-len", "16", "--head-dim", "64",
                       "--half-window", "8", "--precision", "fp32")
    assert code == 0
    summary = json.loads(out.split("\n", 1)[1])
    assert summary["initiation_interval"] == 264


def test_simulate_bigbird_allocation(capsys):
    code, out, _ = run(capsys, "simulate", "--seq-len", "2048", "--head-dim", "64",
                       "--half-window", "96", "--globals", "0-127",
                       "--random-per-row", "192")
    assert code == 0
    summary = json.loads(out.split("\n", 1)[1])
    assert summary["core_allocation"] == {"window": 192, "global": 128, "random": 192}


def test_simulate_timing_overrides_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "seq_len": 16, "head_dim": 64, "half_window": 8,
        "timing": {"load": 100, "qk": 300},
    }))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg))
    assert code == 0
    summary = json.loads(out.split("\n", 1)[1])
    assert summary["stage_latencies"]["load"] == 100
    assert summary["stage_latencies"]["qk"] == 300
    assert summary["initiation_interval"] == 300


def test_simulate_energy_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "seq_len": 4096, "head_dim": 64, "half_window": 256,
        "energy_specs": [
            {"label": "fpga", "clock_hz": 200e6, "power_watts": 30},
            {"label": "gpu", "clock_hz": 1.7e9, "power_watts": 300},
        ],
    }))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg))
    assert code == 0
    summary = json.loads(out.split("\n", 1)[1])
    assert summary["energy_joules"]["fpga"] == pytest.approx(0.12359985, rel=1e-12)
    assert "fpga/gpu" in summary["energy_ratios"]


def test_analyze_grid(tmp_path, capsys):
    out_path = tmp_path / "costs.csv"
    code, _, _ = run(capsys, "analyze", "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().strip().splitlines()
    assert len(lines) == 1 + 8 * 3  # 8 grid points x 3 attention kinds
    chunk_rows = [ln for ln in lines[1:] if ",sliding_chunks," in ln]
    assert all(ln.rstrip().rsplit(",", 1)[1] for ln in chunk_rows)  # redundancy column filled


def test_patterns_json(capsys):
    code, out, _ = run(capsys, "patterns", "--seq-len", "12", "--half-window", "2",
                       "--globals", "0", "--random-per-row", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["seq_len"] == 12
    assert len(doc["rows"]) == 12
    assert doc["rows"][5]["cols"] == sorted(doc["rows"][5]["cols"])


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seq_len": 64, "head_dim": 8, "half_window": 4, "seed": 3}))
    code, out, _ = run(capsys, "patterns", "--config", str(cfg), "--seq-len", "32")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["seq_len"] == 32  # flag wins
    assert doc["config"]["half_window"] == 4  # file value kept


def test_unknown_config_field_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seq_len": 64, "banana": 1}))
    code, _, err = run(capsys, "verify", "--config", str(cfg))
    assert code == 2
    assert "unknown config fields" in err


def test_invalid_config_values_exit_2(capsys):
    code, _, err = run(capsys, "verify", "--seq-len", "4", "--half-window", "1",
                       "--random-per-row", "10")
    assert code == 2


def test_missing_config_file_exit_3(capsys):
    code, _, err = run(capsys, "verify", "--config", "/nonexistent/cfg.json")
    assert code == 3


def test_unwritable_out_exit_3(capsys):
    code, _, err = run(capsys, "analyze", "--out", "/nonexistent-dir/out.csv")
    assert code == 3


def test_determinism_byte_identical_outputs(tmp_path, capsys):
    for command, extra in [
        ("verify", ["--draws", "2", "--format", "json"]),
        ("simulate", ["--seq-len", "64", "--head-dim", "8", "--half-window", "4"]),
        ("analyze", []),
        ("patterns", ["--seq-len", "16", "--half-window", "2", "--random-per-row", "1"]),
    ]:
        outputs = []
        for attempt in ("a", "b"):
            base = tmp_path / f"{command}-{attempt}"
            code, out, _ = run(capsys, command, *extra, "--out", str(base))
            assert code == 0
            blobs = [out]
            for path in sorted(tmp_path.glob(f"{command}-{attempt}*")):
                if path.is_file():
                    blobs.append(path.read_bytes())
            outputs.append(blobs)
        assert outputs[0] == outputs[1], f"{command} outputs differ between runs"
