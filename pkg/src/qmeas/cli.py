"""Command-line front end: parse a config, run a scenario, write CSV + JSON.

Outputs are byte-deterministic: identical (config, seed) produce identical
files, including when trajectories are fanned out to a worker pool
(reductions happen in fixed chunk order). Exit codes: 0 success, 1 invalid
config/arguments, 2 numerical failure or failing verification checks.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chm import MonitoringModel, propagate_chm_series
from .config import RunConfig, parse_config
from .errors import ConfigError, QmeasError, ValidationError
from .experiments import (
    DrivenTwoLevel,
    analyze_rabi_line,
    run_rabi_monitor,
    run_transition_monitor,
    run_zeno_scan,
)
from .hilbert import DensityMatrix, trace_distance
from .lindblad import LindbladModel, integrate_lindblad
from .readout import TimeGrid, constant_record, parse_record, reference_log_weight
from .sse import ensemble_accumulate
from .chain import FuzzyKraus, run_chain_ensemble, run_decoherence_chain
from .chain import _run_chain_batch as _chain_batch
from .verify import run_all_checks

_EPILOG = """\
config format: flat sections of key = value lines, e.g.

    [run]
    scenario = zeno          # lindblad | chm | sse-ensemble | chain |
                             # zeno | rabi-monitor | transition | verify
    seed = 0
    [model]
    level_splitting = 2.0
    rabi = 1.0
    [zeno]
    kappa_list = 0.1 1 10 100
    n_traj = 400

matrix scenarios take [model] preset = two-level (H = sigma_x, A = sigma_z)
or three-level (H = 0, A = diag(0,1,3)), or explicit matrices with rows
separated by ';' and entries like 1+0i, plus kappa and psi0 (basis0, basis1,
plus, or an amplitude row); [grid] takes t0, dt, n_steps. Scenario extras:
[chm] record_value or record_file; [sse] n_traj; [chain] strength, n_shots,
n_chains, collapse_threshold; [rabi] search_bins, band_bins, max_offset_bins;
[transition] smoothing_window, threshold_fraction, initial.
All unlisted keys default as documented in the README.
"""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _json_ready(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _write_summary(out: Path, cfg: RunConfig, headline: dict, outputs: list[str]) -> None:
    doc = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg.raw,
        "outputs": sorted(outputs),
        "headline": _json_ready(headline),
        "version": __version__,
    }
    path = out / "summary.json"
    path.write_text(
        json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
        newline="\n",
    )


def _complex_header(dim: int) -> list[str]:
    cols = []
    for i in range(dim):
        for j in range(dim):
            cols += [f"re_{i}{j}", f"im_{i}{j}"]
    return cols


def _grid_from(cfg: RunConfig) -> TimeGrid:
    if cfg.dt is None or cfg.n_steps is None:
        raise ConfigError("this scenario needs [grid] dt and n_steps")
    return TimeGrid(t0=cfg.t0, dt=cfg.dt, n_steps=cfg.n_steps)


def _run_lindblad(cfg: RunConfig, out: Path) -> dict:
    grid = _grid_from(cfg)
    model = LindbladModel(cfg.h, cfg.a, cfg.kappa)
    rhos = integrate_lindblad(model, DensityMatrix.from_state(cfg.psi0), grid)
    times = grid.times()
    rows = []
    for t, rho in zip(times, rhos):
        row = [t]
        for v in rho.entries.ravel():
            row += [v.real, v.imag]
        rows.append(row)
    _write_csv(out / "trajectory.csv", ["t"] + _complex_header(model.dim), rows)
    purity = float(np.trace(rhos[-1].entries @ rhos[-1].entries).real)
    return {"final_purity": purity, "n_output_states": len(rhos)}


def _run_chm(cfg: RunConfig, out: Path) -> dict:
    if cfg.record_file is not None:
        try:
            text = Path(cfg.record_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read record_file: {exc}") from exc
        record = parse_record(text)
    else:
        record = constant_record(_grid_from(cfg), cfg.record_value)
    model = MonitoringModel(cfg.h, cfg.a, cfg.kappa)
    logs, amps = propagate_chm_series(model, cfg.psi0, record)
    rows = []
    for k, t in enumerate(record.grid.times()):
        # row 0 is the initial state; the a column holds the value applied on
        # the slice ending at t
        a_val = record.values[max(k - 1, 0)]
        row = [t, a_val, logs[k]]
        for v in amps[k]:
            row += [v.real, v.imag]
        rows.append(row)
    header = ["t", "a", "log_norm"] + [c for i in range(model.dim) for c in (f"re_{i}", f"im_{i}")]
    _write_csv(out / "selective_run.csv", header, rows)
    log_density = 2.0 * logs[-1] + reference_log_weight(record, cfg.kappa)
    return {"final_log_norm": float(logs[-1]), "log_density": float(log_density)}


def _run_sse_ensemble(cfg: RunConfig, out: Path, workers: int) -> dict:
    grid = _grid_from(cfg)
    model = MonitoringModel(cfg.h, cfg.a, cfg.kappa)
    rho_sum, _ = ensemble_accumulate(model, cfg.psi0, grid, cfg.n_traj, cfg.seed, workers)
    ref = integrate_lindblad(
        LindbladModel(cfg.h, cfg.a, cfg.kappa), DensityMatrix.from_state(cfg.psi0), grid
    )
    rows = []
    worst = 0.0
    for t, m, r in zip(grid.times(), rho_sum, ref):
        mean = DensityMatrix(0.5 * (m + m.conj().T) / cfg.n_traj)
        d = trace_distance(mean, r)
        worst = max(worst, d)
        rows.append([t, float(np.trace(cfg.a.entries @ mean.entries).real), d])
    _write_csv(out / "ensemble.csv", ["t", "expect_A", "trace_distance_lindblad"], rows)
    return {"n_traj": cfg.n_traj, "max_trace_distance": worst}


def _run_chain(cfg: RunConfig, out: Path) -> dict:
    k = FuzzyKraus(cfg.a, cfg.strength)
    first = run_decoherence_chain(k, cfg.psi0, cfg.n_shots, cfg.seed, cfg.collapse_threshold)
    evals, _ = cfg.a.eigh()
    # per-shot eigenspace populations of the exported (first) chain
    _, _, _, single_pops = _chain_batch(
        k, cfg.psi0, cfg.n_shots, [cfg.seed], cfg.collapse_threshold
    )
    rows = []
    for shot in range(cfg.n_shots):
        rows.append([shot + 1, first.readouts[shot]] + list(single_pops[shot + 1]))
    header = ["shot", "a"] + [f"pop_{i}" for i in range(cfg.a.dim)]
    _write_csv(out / "chain.csv", header, rows)
    collapsed, _, _ = run_chain_ensemble(
        k, cfg.psi0, cfg.n_shots, cfg.n_chains, cfg.seed, cfg.collapse_threshold
    )
    counts = {f"collapse_to_{i}": int(np.sum(collapsed == i)) for i in range(cfg.a.dim)}
    counts["no_collapse"] = int(np.sum(collapsed < 0))
    return {
        "n_chains": cfg.n_chains,
        "first_chain_collapsed_to": first.collapsed_to,
        "counts": counts,
        "eigenvalues": list(evals),
    }


def _run_zeno(cfg: RunConfig, out: Path, workers: int) -> dict:
    system = DrivenTwoLevel(cfg.level_splitting, cfg.rabi, cfg.zeno_kappas[0])
    scan = run_zeno_scan(system, list(cfg.zeno_kappas), n_traj=cfg.zeno_n_traj, seed=cfg.seed)
    rows = [
        [k, p, d]
        for k, p, d in zip(scan.kappa_values, scan.transfer_probabilities, scan.sse_trace_distances)
    ]
    _write_csv(out / "zeno_scan.csv", ["kappa", "transfer_probability", "sse_trace_distance"], rows)
    return {
        "kappa_values": list(scan.kappa_values),
        "transfer_probabilities": list(scan.transfer_probabilities),
        "monotone_non_increasing": bool(np.all(np.diff(scan.transfer_probabilities) <= 1e-12)),
    }


def _run_rabi(cfg: RunConfig, out: Path) -> dict:
    grid_needed = _grid_from(cfg)
    system = DrivenTwoLevel(cfg.level_splitting, cfg.rabi, cfg.kappa)
    t_final = grid_needed.duration
    traj, spectrum = run_rabi_monitor(system, t_final, grid_needed.dt, cfg.seed)
    stats = analyze_rabi_line(
        spectrum,
        system.rabi,
        max_offset_bins=cfg.max_offset_bins,
        search_bins=cfg.search_bins,
        band_bins=cfg.band_bins,
    )
    _write_csv(
        out / "record.csv",
        ["t", "a"],
        zip(traj.grid.midpoints(), traj.record.values),
    )
    _write_csv(out / "spectrum.csv", ["frequency", "power"], spectrum)
    soft = cfg.kappa * cfg.level_splitting**2 < cfg.rabi
    return {
        "peak_frequency": stats.peak_frequency,
        "offset_bins": stats.offset_bins,
        "power_ratio": stats.power_ratio,
        "detected": stats.detected,
        "soft_regime": bool(soft),
    }


def _run_transition(cfg: RunConfig, out: Path) -> dict:
    grid = _grid_from(cfg)
    system = DrivenTwoLevel(cfg.level_splitting, cfg.rabi, cfg.kappa)
    initial = system.ground_state() if cfg.initial == "ground" else system.excited_state()
    result = run_transition_monitor(
        system,
        grid.duration,
        grid.dt,
        cfg.seed,
        smoothing_window=cfg.smoothing_window,
        threshold_fraction=cfg.threshold_fraction,
        initial=initial,
    )
    _write_csv(
        out / "record.csv",
        ["t", "a_raw", "a_smoothed"],
        zip(result.trajectory.grid.midpoints(), result.trajectory.record.values, result.smoothed_record),
    )
    return {
        "detected_times": list(result.detected_times),
        "n_detected": len(result.detected_times),
        "thresholds": [result.lower_threshold, result.upper_threshold],
        "smoothing_window": result.smoothing_window,
    }


def _run_verify(cfg: RunConfig, out: Path, quiet: bool) -> tuple[dict, bool]:
    results = run_all_checks()
    rows = [[r.name, "pass" if r.passed else "fail", r.detail] for r in results]
    _write_csv(out / "checks.csv", ["check", "status", "detail"], rows)
    for r in results:
        if not quiet:
            print(r.line())
    ok = all(r.passed for r in results)
    headline = {
        "n_checks": len(results),
        "n_failed": sum(not r.passed for r in results),
        "failed": [r.name for r in results if not r.passed],
    }
    return headline, ok


def dispatch(cfg: RunConfig, out_dir: str | None, workers: int, quiet: bool = False) -> int:
    """Run the configured scenario; returns the process exit status."""
    out = Path(out_dir if out_dir else (cfg.out or f"runs/{cfg.scenario}"))
    out.mkdir(parents=True, exist_ok=True)
    verify_ok = True
    try:
        if cfg.scenario == "lindblad":
            headline = _run_lindblad(cfg, out)
        elif cfg.scenario == "chm":
            headline = _run_chm(cfg, out)
        elif cfg.scenario == "sse-ensemble":
            headline = _run_sse_ensemble(cfg, out, workers)
        elif cfg.scenario == "chain":
            headline = _run_chain(cfg, out)
        elif cfg.scenario == "zeno":
            headline = _run_zeno(cfg, out, workers)
        elif cfg.scenario == "rabi-monitor":
            headline = _run_rabi(cfg, out)
        elif cfg.scenario == "transition":
            headline = _run_transition(cfg, out)
        elif cfg.scenario == "verify":
            headline, verify_ok = _run_verify(cfg, out, quiet)
        else:  # unreachable: parse_config validates the scenario
            raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QmeasError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    outputs = sorted(p.name for p in out.iterdir() if p.suffix == ".csv")
    _write_summary(out, cfg, headline, outputs)
    if not quiet:
        brief = ", ".join(f"{k}={v}" for k, v in list(_json_ready(headline).items())[:3])
        print(f"{cfg.scenario}: wrote {len(outputs)} csv file(s) to {out} ({brief})")
    return 0 if verify_ok else 2


def _resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("QMEAS_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QMEAS_WORKERS must be an integer, got {env!r}") from exc
    return max(1, os.cpu_count() or 1)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qmeas",
        description="continuous fuzzy quantum measurement simulations",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="worker pool size for trajectory ensembles "
        "(default: QMEAS_WORKERS or the available parallelism)",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress the summary line")
    parser.add_argument("--version", action="version", version=f"qmeas {__version__}")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(text)
        workers = _resolve_workers(args.workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        if args.seed < 0:
            print("error: seed must be non-negative", file=sys.stderr)
            return 1
        cfg.seed = args.seed
    return dispatch(cfg, args.out, workers, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
