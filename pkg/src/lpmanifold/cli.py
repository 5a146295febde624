"""Command line entry point ``lpmanifold``."""

from __future__ import annotations

import logging
import platform
import sys
import time
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from .config import STREAMS, ConfigError, ExperimentConfig, derive_seed, load_config
from .experiment import (
    Experiment,
    stage_audit,
    stage_manifold,
    stage_simulate_noise,
    stage_solve,
    stage_verify,
)
from .io import file_digest, read_json, write_csv, write_json

log = logging.getLogger("lpmanifold")


def build_manifest(config: ExperimentConfig, stage: str, out_dir: Path, files, acceptance=None) -> dict:
    """Run manifest; wall-clock times live in ``timing.json`` so the manifest is reproducible."""
    seed = config.noise.seed
    return {
        "stage": stage,
        "config_hash": config.digest(),
        "config": config.to_dict() | {"output": None},
        "seeds": {"root": seed, "streams": {k: derive_seed(seed, k) for k in STREAMS}},
        "versions": {
            "lpmanifold": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": {name: file_digest(out_dir / name) for name in sorted(files)},
        "acceptance": acceptance,
    }


def _write_stage(out_dir: Path, arrays: dict, report: dict, report_name: str, formats) -> list:
    files = []
    if "csv" in formats:
        for name, (header, rows) in arrays.items():
            write_csv(out_dir / name, header, rows)
            files.append(name)
    if "json" in formats:
        write_json(out_dir / report_name, report)
        files.append(report_name)
    return files


def _finish(ctx_obj, stage, files, started, acceptance=None):
    cfg, out_dir = ctx_obj["config"], ctx_obj["out"]
    manifest = build_manifest(cfg, stage, out_dir, files, acceptance)
    write_json(out_dir / "manifest.json", manifest)
    write_json(out_dir / "timing.json", {"stage": stage, "wall_clock_seconds": time.perf_counter() - started})
    click.echo(f"wrote {len(files)} output(s) and manifest.json to {out_dir}")
    return manifest


@click.group()
@click.version_option(__version__)
def main():
    """Random stable manifolds of fBm-driven evolution equations."""


def common(func):
    func = click.option("--debug-dumps", is_flag=True, help="Write intermediate arrays and debug logs.")(func)
    func = click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Worker processes.")(func)
    func = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(func)
    func = click.option("--seed", type=int, default=None, help="Root seed (overrides the config).")(func)
    func = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                        help="TOML configuration file.")(func)
    return func


def _setup(config_path, seed, out, debug_dumps):
    logging.basicConfig(level=logging.DEBUG if debug_dumps else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path) if config_path else ExperimentConfig()
    except ConfigError as exc:
        raise click.UsageError(f"invalid configuration: {exc}") from None
    if seed is not None:
        cfg = cfg.with_seed(seed)
    out_dir = Path(out if out is not None else cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    return {"config": cfg, "out": out_dir}


def _run_stage(name, func, config_path, seed, out, jobs, debug_dumps, report_name, needs_jobs=False):
    obj = _setup(config_path, seed, out, debug_dumps)
    started = time.perf_counter()
    exp = Experiment(obj["config"])
    arrays, report = func(exp, jobs) if needs_jobs else func(exp)
    files = _write_stage(obj["out"], arrays, report, report_name, obj["config"].output.formats)
    if debug_dumps and name != "simulate-noise":
        arr, _ = stage_simulate_noise(exp)
        files += _write_stage(obj["out"], arr, {}, "debug_noise.json", ("csv",))
    return _finish(obj, name, files, started)


@main.command("simulate-noise")
@common
def simulate_noise(config_path, seed, out, jobs, debug_dumps):
    """Sample the noise path and report its Hoelder seminorms."""
    _run_stage("simulate-noise", stage_simulate_noise, config_path, seed, out, jobs, debug_dumps, "noise_report.json")


@main.command()
@common
def solve(config_path, seed, out, jobs, debug_dumps):
    """Forward mild solution by blockwise Picard iteration."""
    _run_stage("solve", stage_solve, config_path, seed, out, jobs, debug_dumps, "solve_report.json")


@main.command()
@common
def manifold(config_path, seed, out, jobs, debug_dumps):
    """Lyapunov-Perron fixed points and the manifold graph on the configured grid."""
    _run_stage("manifold", stage_manifold, config_path, seed, out, jobs, debug_dumps, "manifold_report.json", True)


@main.command()
@common
def verify(config_path, seed, out, jobs, debug_dumps):
    """Decay, invariance and off-manifold controls for points on the manifold."""
    _run_stage("verify", stage_verify, config_path, seed, out, jobs, debug_dumps, "verify_report.json", True)


@main.command()
@common
def audit(config_path, seed, out, jobs, debug_dumps):
    """Replay the constant and inequality audits."""
    _run_stage("audit", stage_audit, config_path, seed, out, jobs, debug_dumps, "audit_report.json")


def run_accept(cfg: ExperimentConfig, out_dir: Path, repeat: bool = True, echo=print):
    """Run criteria 1-9 (twice when ``repeat``) and compare the manifests for criterion 10.

    Returns ``(results, manifest)``.
    """
    from .acceptance import determinism_result, run_criteria

    def one(run_dir: Path):
        started = time.perf_counter()
        results = run_criteria(cfg)
        table = [r.table_row() for r in results]
        write_json(run_dir / "acceptance.json", table)
        manifest = build_manifest(cfg, "accept", run_dir, ["acceptance.json"], [
            {"number": r.number, "status": r.status} for r in results
        ])
        write_json(run_dir / "manifest.json", manifest)
        write_json(run_dir / "timing.json", {
            "wall_clock_seconds": time.perf_counter() - started,
            "criteria": {r.number: {"runtime": r.runtime, "limit": r.runtime_limit} for r in results},
        })
        return results, manifest

    results, manifest = one(out_dir)
    for r in results:
        echo(r.line())
    if repeat:
        _, manifest_b = one(out_dir / "repeat")
        det = determinism_result(read_json(out_dir / "manifest.json"), read_json(out_dir / "repeat" / "manifest.json"))
    else:
        from .acceptance import CriterionResult

        det = CriterionResult(10, "Two accept runs give identical manifests", True,
                              {"reason": "repeat disabled"}, status="SKIPPED")
    echo(det.line() + (" (repeat disabled)" if det.status == "SKIPPED" else ""))
    results.append(det)
    return results, manifest


@main.command()
@common
@click.option("--no-repeat", is_flag=True, help="Skip the second run used for the determinism criterion.")
def accept(config_path, seed, out, jobs, debug_dumps, no_repeat):
    """Run the full acceptance suite; exit status 1 on any failure."""
    obj = _setup(config_path, seed, out, debug_dumps)
    results, _ = run_accept(obj["config"], obj["out"], repeat=not no_repeat, echo=click.echo)
    failed = [r for r in results if r.status == "FAIL"]
    write_json(obj["out"] / "acceptance_summary.json", [
        {"number": r.number, "name": r.name, "status": r.status} for r in results
    ])
    if failed:
        click.echo(f"{len(failed)} criterion/criteria failed", err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    main()
