"""Command-line surface tying the library together.

Subcommands:

* ``verify``: oracle-equivalence run over a seeded matrix family
* ``simulate``: pipeline simulation emitting a trace CSV and JSON summary
* ``analyze``: cost-model sweep over a sequence-length grid
* ``patterns``: attended-set JSON for a configuration

Configuration comes from an optional JSON file (``--config``) plus flags;
flags win. Outputs are fully deterministic for a given configuration and
seed. Exit codes: 0 success, 1 verification failure, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys

from .config import AttentionConfig, NumericMode
from .costs import EnergySpec, ModelDims, cost_sweep, energy_per_attention, reports_json, write_reports_csv
from .errors import NumericOverflowError
from .matrices import DenseMatrix, random_qkv
from .numerics import (
    masked_dense_attention,
    max_relative_error,
    sliding_chunks_attention,
    streaming_window_attention,
)
from .patterns import attend_sets_to_json, build_attend_sets
from .pipeline import default_timing, simulate_sequence

STREAM_TOLERANCE = {NumericMode.STABLE: 1e-10, NumericMode.RAW: 1e-8}
CHUNKS_TOLERANCE = 1e-12

_DEFAULTS = {
    "seq_len": 256,
    "head_dim": 64,
    "half_window": 32,
    "global_tokens": (),
    "random_per_row": 0,
    "seed": 7,
    "precision": "fp16",
    "mode": "stable",
    "scale_scores": False,
    "out": None,
    "format": "csv",
    "input_scale": 1.0,
    "draws": 5,
    "n_grid": (128, 256, 512, 1024, 2048, 4096, 8192, 16384),
    "d_model": 768,
    "heads": 12,
    "ffn_mult": 4.0,
    "timing": {},
    "energy_specs": (),
}

_TIMING_KEYS = {"load", "qk", "sv", "zred1", "zred2", "rowsum1", "rowsum2",
                "div_out", "mac_ii", "random_load"}


class ConfigError(Exception):
    pass


def _parse_index_list(text: str) -> tuple[int, ...]:
    """Comma-separated indices; ``a-b`` expands to the inclusive range."""
    out: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "-" in token[1:]:
            lo, _, hi = token.partition("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(token))
    return tuple(out)


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(doc) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
    if "timing" in doc:
        bad = set(doc["timing"]) - _TIMING_KEYS
        if bad:
            raise ConfigError(f"{path}: unknown timing fields {sorted(bad)}")
    return doc


def _resolve(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        cfg.update(_load_config_file(args.config))
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if isinstance(cfg["global_tokens"], str):
        cfg["global_tokens"] = _parse_index_list(cfg["global_tokens"])
    cfg["global_tokens"] = tuple(int(g) for g in cfg["global_tokens"])
    if isinstance(cfg["n_grid"], str):
        cfg["n_grid"] = _parse_index_list(cfg["n_grid"])
    cfg["n_grid"] = tuple(int(n) for n in cfg["n_grid"])
    if cfg["precision"] not in ("fp16", "fp32"):
        raise ConfigError(f"precision must be fp16 or fp32, got {cfg['precision']!r}")
    if cfg["mode"] not in ("raw", "stable"):
        raise ConfigError(f"mode must be raw or stable, got {cfg['mode']!r}")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    return cfg


def _attention_config(cfg: dict) -> AttentionConfig:
    return AttentionConfig(
        seq_len=cfg["seq_len"],
        head_dim=cfg["head_dim"],
        half_window=cfg["half_window"],
        global_tokens=cfg["global_tokens"],
        random_per_row=cfg["random_per_row"],
        random_seed=cfg["seed"],
        scale_scores=cfg["scale_scores"],
        mode=NumericMode(cfg["mode"]),
    )


def _energy_specs(cfg: dict) -> list[EnergySpec]:
    specs = []
    for entry in cfg["energy_specs"]:
        try:
            specs.append(EnergySpec(entry["label"], float(entry["clock_hz"]),
                                    float(entry["power_watts"])))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad energy_specs entry {entry!r}: {e}") from e
    return specs


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def _scaled_qkv(seed: int, n: int, h: int, input_scale: float):
    q, k, v = random_qkv(seed, n, h)
    if input_scale != 1.0:
        q = DenseMatrix(q.data * input_scale)
        k = DenseMatrix(k.data * input_scale)
        v = DenseMatrix(v.data * input_scale)
    return q, k, v


def cmd_verify(cfg: dict) -> int:
    """Cross-check streaming and chunked attention against the masked oracle."""
    base = _attention_config(cfg)
    n, h, w = base.seq_len, base.head_dim, base.half_window
    stream_tol = STREAM_TOLERANCE[base.mode]
    window_only = not base.global_tokens and base.random_per_row == 0
    run_chunks = window_only and n % w == 0 and n >= 2 * w
    records = []
    failures = []
    for d in range(cfg["draws"]):
        seed = cfg["seed"] + d
        config = dataclasses.replace(base, random_seed=seed)
        q, k, v = _scaled_qkv(seed, n, h, cfg["input_scale"])
        try:
            sets = build_attend_sets(config)
            masked = masked_dense_attention(q, k, v, sets, config.scale_scores)
            stream, traffic = streaming_window_attention(q, k, v, config)
            record = {"seq_len": n, "half_window": w, "seed": seed}
            record["stream_vs_masked"] = max_relative_error(stream.data, masked.data)
            if record["stream_vs_masked"] > stream_tol:
                failures.append(f"streaming exceeds {stream_tol:g} "
                                f"(N={n}, w={w}, seed={seed}): {record['stream_vs_masked']:.3e}")
            if window_only:
                total = traffic.q_rows + traffic.k_rows + traffic.v_rows
                record["fetched_rows"] = total
                if total != 3 * n:
                    failures.append(f"traffic {total} != 3N={3 * n} (N={n}, w={w}, seed={seed})")
            if run_chunks:
                chunks = sliding_chunks_attention(q, k, v, w, config.scale_scores)
                record["chunks_vs_masked"] = max_relative_error(chunks.z.data, masked.data)
                record["chunk_redundancy"] = str(chunks.redundancy_ratio)
                if record["chunks_vs_masked"] > CHUNKS_TOLERANCE:
                    failures.append(f"sliding chunks exceed {CHUNKS_TOLERANCE:g} "
                                    f"(N={n}, w={w}, seed={seed}): {record['chunks_vs_masked']:.3e}")
        except NumericOverflowError as e:
            print(f"verify: numeric overflow at row {e.row} (N={n}, w={w}, seed={seed})")
            return 1
        records.append(record)

    worst_stream = max(r["stream_vs_masked"] for r in records)
    print(f"streaming vs masked-dense: max rel err {worst_stream:.3e} (tolerance {stream_tol:g})")
    if run_chunks:
        worst_chunks = max(r["chunks_vs_masked"] for r in records)
        print(f"sliding-chunks vs masked-dense: max rel err {worst_chunks:.3e} "
              f"(tolerance {CHUNKS_TOLERANCE:g})")
    for line in failures:
        print(f"FAIL: {line}")
    if cfg["out"]:
        if cfg["format"] == "json":
            _write_text(cfg["out"], json.dumps(records, indent=2, sort_keys=True))
        else:
            buf = io.StringIO()
            cols = sorted({key for r in records for key in r})
            writer = csv.DictWriter(buf, fieldnames=cols)
            writer.writeheader()
            for r in records:
                writer.writerow(r)
            _write_text(cfg["out"], buf.getvalue())
    return 1 if failures else 0


def _build_timing(cfg: dict, config: AttentionConfig):
    timing = default_timing(cfg["precision"], head_dim=config.head_dim,
                            half_window=config.half_window,
                            core_count=config.core_count)
    if cfg["timing"]:
        timing = timing.with_overrides(**{k: int(v) for k, v in cfg["timing"].items()})
    return timing


def cmd_simulate(cfg: dict) -> int:
    """Simulate a sequence and emit the trace CSV plus a JSON summary."""
    config = _attention_config(cfg)
    timing = _build_timing(cfg, config)
    q, k, v = _scaled_qkv(cfg["seed"], config.seq_len, config.head_dim, cfg["input_scale"])
    _, trace = simulate_sequence(q, k, v, config, timing)
    print(f"total_cycles={trace.total_cycles} closed_form={trace.closed_form_cycles} "
          f"ii={trace.initiation_interval} fill={trace.fill_cycles}")
    if trace.total_cycles != trace.closed_form_cycles:
        print(f"FAIL: event-driven total {trace.total_cycles} != closed form "
              f"{trace.closed_form_cycles}")
        return 1
    summary = trace.summary()
    specs = _energy_specs(cfg)
    if specs:
        energies = {s.label: energy_per_attention(trace.total_cycles, s) for s in specs}
        summary["energy_joules"] = energies
        summary["energy_ratios"] = {
            f"{a.label}/{b.label}": energies[a.label] / energies[b.label]
            for a in specs for b in specs if a.label != b.label
        }
    summary_text = json.dumps(summary, indent=2, sort_keys=True)
    if cfg["out"]:
        buf = io.StringIO()
        trace.to_csv(buf)
        _write_text(f"{cfg['out']}.trace.csv", buf.getvalue())
        _write_text(f"{cfg['out']}.summary.json", summary_text)
    else:
        _write_text(None, summary_text)
    return 0


def cmd_analyze(cfg: dict) -> int:
    """Sweep the cost models over a sequence-length grid."""
    if cfg["d_model"] % cfg["heads"] != 0:
        raise ConfigError(f"d_model={cfg['d_model']} not divisible by heads={cfg['heads']}")
    dims = ModelDims(d_model=cfg["d_model"], heads=cfg["heads"],
                     head_dim=cfg["d_model"] // cfg["heads"], ffn_mult=cfg["ffn_mult"])
    bytes_per_scalar = 2 if cfg["precision"] == "fp16" else 4
    reports = cost_sweep(dims, cfg["n_grid"], half_window=cfg["half_window"],
                         bytes_per_scalar=bytes_per_scalar)
    if cfg["format"] == "json":
        _write_text(cfg["out"], reports_json(reports))
    else:
        buf = io.StringIO()
        write_reports_csv(reports, buf)
        _write_text(cfg["out"], buf.getvalue())
    return 0


def cmd_patterns(cfg: dict) -> int:
    """Emit the attended-set JSON (golden-file form) for the configuration."""
    config = _attention_config(cfg)
    sets = build_attend_sets(config)
    _write_text(cfg["out"], attend_sets_to_json(sets, config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="winattn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--seq-len", dest="seq_len", type=int)
        p.add_argument("--head-dim", dest="head_dim", type=int)
        p.add_argument("--half-window", dest="half_window", type=int)
        p.add_argument("--globals", dest="global_tokens",
                       help="comma-separated global token indices; a-b spans a range")
        p.add_argument("--random-per-row", dest="random_per_row", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--precision", choices=["fp16", "fp32"],
                       help="pipeline timing precision (numerics stay double)")
        p.add_argument("--mode", choices=["raw", "stable"])
        p.add_argument("--scale-scores", dest="scale_scores", action="store_const", const=True)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("verify", help="oracle-equivalence run")
    common(p)
    p.add_argument("--input-scale", dest="input_scale", type=float)
    p.add_argument("--draws", type=int)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("simulate", help="pipeline simulation")
    common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("analyze", help="cost-model sweep")
    common(p)
    p.add_argument("--n-grid", dest="n_grid", help="comma-separated sequence lengths")
    p.add_argument("--d-model", dest="d_model", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--ffn-mult", dest="ffn_mult", type=float)
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("patterns", help="emit attended-set JSON")
    common(p)
    p.set_defaults(handler=cmd_patterns)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        return args.handler(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericOverflowError as e:
        print(f"verification failure: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
