"""Command-line front end.

Subcommands: ``generate`` (task data CSVs), ``sweep`` (selection-method
comparison over an m_red grid), ``analyze`` (sparseness grid diagnostics)
and ``replay`` (re-run a manifest bitwise). Every run writes a manifest that
fully determines its outputs.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__, dynamics, pipeline
from .config import (
    analysis_from_dict,
    config_hash,
    experiment_from_dict,
    resolve_config,
)
from .errors import ConfigError, ShiftRcError
from .linalg import save_r_diag_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _f17(x: float) -> str:
    return f"{float(x):.17g}"


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON ({path}, line {exc.lineno}, "
            f"column {exc.colno}): {exc.msg}"
        ) from None
    return resolve_config(raw)


def _apply_overrides(resolved: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        resolved["master_seed"] = args.seed
    if getattr(args, "nrmse_mode", None) is not None:
        resolved["nrmse_mode"] = args.nrmse_mode
    return resolved


def _thread_count(args) -> int:
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    env = os.environ.get("SHIFTRC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SHIFTRC_THREADS is not an integer: {env!r}") from None
    return 1


def _write_manifest(out_dir: Path, command: str, resolved: dict,
                    output_paths: list[str], wall_time: float,
                    subset_mode: str) -> None:
    manifest = {
        "tool": "shiftrc",
        "tool_version": __version__,
        "command": command,
        "subset_mode": subset_mode,
        "master_seed": resolved["master_seed"],
        "config_hash": config_hash(resolved),
        "config_echo": resolved,
        "output_paths": output_paths,
        "wall_time_seconds": wall_time,
    }
    with open(out_dir / "manifest.json", "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_column_csv(path: Path, values) -> None:
    lines = ["n,value"]
    lines += [f"{n},{_f17(v)}" for n, v in enumerate(values)]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _run_generate(resolved: dict, out_dir: Path) -> list[str]:
    cfg = experiment_from_dict(resolved)
    series = pipeline.build_series(cfg.data)
    dataset = pipeline.build_dataset(cfg.data)
    dynamics.save_series_csv(out_dir / "series.csv", series,
                             cfg.data.sample_interval)
    _write_column_csv(out_dir / "drive_train.csv", dataset.drive_train)
    _write_column_csv(out_dir / "target_train.csv", dataset.target_train)
    _write_column_csv(out_dir / "drive_test.csv", dataset.drive_test)
    _write_column_csv(out_dir / "target_test.csv", dataset.target_test)
    return [
        "series.csv",
        "drive_train.csv",
        "target_train.csv",
        "drive_test.csv",
        "target_test.csv",
    ]


def _sweep_csv_lines(rows) -> list[str]:
    header = (
        "m_red,nrmse_rrqr_mean,nrmse_rrqr_std,nrmse_rand_mean,nrmse_rand_std,"
        "nrmse_baseline_mean,percent_improvement"
    )
    lines = [header]
    for row in rows:
        fields = [str(row.m_red)]
        for value in (
            row.nrmse_rrqr_mean,
            row.nrmse_rrqr_std,
            row.nrmse_rand_mean,
            row.nrmse_rand_std,
            row.nrmse_baseline_mean,
            row.percent_improvement,
        ):
            fields.append("" if value is None else _f17(value))
        lines.append(",".join(fields))
    return lines


def _run_sweep(resolved: dict, out_dir: Path, threads: int, subset_mode: str) -> list[str]:
    cfg = experiment_from_dict(resolved)
    result = pipeline.sweep(cfg, threads=threads, subset_mode=subset_mode)
    (out_dir / "sweep.csv").write_text(
        "\n".join(_sweep_csv_lines(result.rows)) + "\n", encoding="ascii"
    )
    with open(out_dir / "cells.json", "w", encoding="ascii") as fh:
        json.dump({"cells": [asdict(c) for c in result.cells]}, fh, indent=2)
        fh.write("\n")
    paths = ["sweep.csv", "cells.json"]
    if result.pivots:
        diag = out_dir / "diagnostics"
        diag.mkdir(exist_ok=True)
        for mask_id, pivot in enumerate(result.pivots):
            sel_path = diag / f"mask_{mask_id:04d}_selection.json"
            pivot.save_json(sel_path)
            rdiag_path = diag / f"mask_{mask_id:04d}_rdiag.csv"
            save_r_diag_csv(rdiag_path, pivot.r_diag)
            paths += [str(sel_path.relative_to(out_dir)),
                      str(rdiag_path.relative_to(out_dir))]
    return paths


def _run_analyze(resolved: dict, out_dir: Path, threads: int) -> list[str]:
    acfg = analysis_from_dict(resolved)
    rows = pipeline.analysis_sweep(acfg, threads=threads)
    lines = ["f_w,f_a,entropy_bits,mean_correlation,nrmse_observer,nrmse_prediction"]
    for row in rows:
        lines.append(
            ",".join(
                _f17(v)
                for v in (
                    row.f_w,
                    row.f_a,
                    row.entropy_bits,
                    row.mean_correlation,
                    row.nrmse_observer,
                    row.nrmse_prediction,
                )
            )
        )
    (out_dir / "analysis.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    return ["analysis.csv"]


def _dispatch(command: str, resolved: dict, out_dir: Path, threads: int,
              subset_mode: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    if command == "generate":
        paths = _run_generate(resolved, out_dir)
    elif command == "sweep":
        paths = _run_sweep(resolved, out_dir, threads, subset_mode)
    elif command == "analyze":
        paths = _run_analyze(resolved, out_dir, threads)
    else:
        raise ConfigError(f"manifest names unknown command {command!r}")
    _write_manifest(out_dir, command, resolved, paths,
                    time.monotonic() - start, subset_mode)


def _cmd_run(args, command: str) -> int:
    resolved = _apply_overrides(_load_config(args.config), args)
    _dispatch(command, resolved, Path(args.out), _thread_count(args),
              getattr(args, "subset", "both"))
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {args.manifest}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"manifest is not valid JSON (line {exc.lineno}): {exc.msg}"
        ) from None
    for key in ("command", "config_echo"):
        if key not in manifest:
            raise ConfigError(f"manifest is missing required field '{key}'")
    resolved = resolve_config(manifest["config_echo"])
    _dispatch(manifest["command"], resolved, Path(args.out),
              _thread_count(args), manifest.get("subset_mode", "both"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftrc",
        description="Time-shift selection experiments for small reservoir computers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (fallback: SHIFTRC_THREADS, then 1)")
        p.add_argument("--nrmse-mode", choices=["global", "paper-literal"],
                       dest="nrmse_mode", default=None,
                       help="error normalization convention")

    p_gen = sub.add_parser("generate", help="write drive/target CSVs for a task")
    common(p_gen)

    p_sweep = sub.add_parser("sweep", help="compare selections over the m_red grid")
    common(p_sweep)
    p_sweep.add_argument("--subset", choices=["rrqr", "random", "both"],
                         default="both", help="which selection arms to run")

    p_ana = sub.add_parser("analyze", help="entropy/correlation sparseness grid")
    common(p_ana)

    p_rep = sub.add_parser("replay", help="re-run a manifest bitwise")
    p_rep.add_argument("--manifest", required=True, help="manifest.json path")
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.add_argument("--threads", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_run(args, args.command)
    except ConfigError as exc:
        print(f"shiftrc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShiftRcError, OSError, ValueError) as exc:
        print(f"shiftrc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
