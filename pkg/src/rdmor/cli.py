"""Command-line entry point.

Artifacts live under ``<out>/<simulation hash>/``: the four snapshot
matrices, ``indicators.json`` and ``simulation.json``.  Reduction outputs
go one level deeper, into ``<config hash>/``, so sweeps with different MOR
settings share one simulation.

Exit codes: 0 success (also when some records are flagged unstable),
1 usage or configuration error, 2 numerical failure of a required artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import METHODS, ZoneSettings, prepare_adaptive, run_adaptive_online
from .bench import (
    ErrorReport,
    OfflineArtifacts,
    SweepRecord,
    error_jumps,
    relative_error,
    run_method,
    sweep,
    timing_table,
    tolerance_table,
    write_manifest,
)
from .config import ExperimentConfig, parse_r_values, preset
from .discretization import discretize, initial_condition
from .errors import ConfigError, DimensionError, DomainError, NumericalError, RdmorError, SplitError
from .full_solver import SnapshotSet, compute_indicators, run_full
from .io import read_matrix, write_matrix

log = logging.getLogger("rdmor")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
SNAPSHOT_FILES = ("S_u", "S_v", "S_f", "S_g")


class UsageError(RdmorError):
    """Bad command-line usage or missing prerequisite artifacts."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- artifact helpers ------------------------------------------------------------

def simulation_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output.directory) / cfg.simulation_hash


def run_dir(cfg: ExperimentConfig) -> Path:
    d = simulation_dir(cfg) / cfg.hash
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default))
    return path


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def load_snapshots(cfg: ExperimentConfig) -> SnapshotSet:
    d = simulation_dir(cfg)
    if not (d / "simulation.json").exists():
        raise UsageError(f"no simulation artifacts in {d}; run `rdmor simulate` with the same config first")
    mats = {}
    for name in SNAPSHOT_FILES:
        M, times = read_matrix(d / f"{name}.rdm")
        mats[name] = M
    return SnapshotSet(mats["S_u"], mats["S_v"], mats["S_f"], mats["S_g"], times, cfg.time.stride, cfg.time.h_t)


def _setup(cfg: ExperimentConfig):
    model = cfg.build_model()
    grid = cfg.grid.build()
    disc = discretize(grid)
    tg = cfg.time.build()
    u0, v0 = initial_condition(model, grid, cfg.init.amplitude, cfg.init.seed)
    return model, disc, tg, u0, v0


# -- commands --------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, method: str = "matrix", force: bool = False) -> Path:
    """Full-order run; writes snapshots, indicators and a manifest (cached by hash)."""
    d = simulation_dir(cfg)
    if (d / "simulation.json").exists() and not force:
        log.info("simulation %s already present", cfg.simulation_hash)
        return d
    d.mkdir(parents=True, exist_ok=True)
    model, disc, tg, u0, v0 = _setup(cfg)
    run = run_full(model, disc, tg, u0, v0, cfg.time.stride, method=method)
    snaps = run.snapshots
    for name in SNAPSHOT_FILES:
        write_matrix(d / f"{name}.rdm", getattr(snaps, name), snaps.times)
    ind = compute_indicators(snaps, cfg.time.tau_t_min)
    _write_json(d / "indicators.json", ind.to_dict())
    _write_json(d / "simulation.json", {
        "simulation_hash": cfg.simulation_hash,
        "seed": cfg.init.seed,
        "method": method,
        "wall_time": run.wall_time,
        "columns": snaps.m,
        "n": snaps.n,
        "tau": ind.tau,
        "tau_index": ind.tau_index,
        "config": cfg.to_string(),
    })
    (d / "config.ini").write_text(cfg.to_string())
    print(f"simulated {cfg.model.name}: {snaps.m} snapshots, tau={ind.tau:.6g}, {run.wall_time:.2f}s -> {d}")
    return d


def _reference(snaps: SnapshotSet):
    return snaps.S_u[:, -1], snaps.S_v[:, -1]


def _build_artifacts(cfg, snaps, methods):
    model, disc, tg, u0, v0 = _setup(cfg)
    return OfflineArtifacts.build(model, disc, snaps, tg, u0, v0, R=cfg.mor.R, ell=cfg.mor.ell, methods=methods,
                                  memory_budget=cfg.mor.memory_budget_mb * 2**20)


def cmd_reduce(cfg: ExperimentConfig, method: str, r: int | None = None) -> dict:
    """One reduced solve; writes the lifted final fields and a summary."""
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    snaps = load_snapshots(cfg)
    art = _build_artifacts(cfg, snaps, [method])
    r = art.R if r is None else r
    traj = run_method(art, method, r)
    u_ref, v_ref = _reference(snaps)
    d = run_dir(cfg)
    summary = {"method": method, "r": r, "R": art.R, "stable": traj.stable, "online_s": traj.wall_time,
               "offline": art.timings, "failed_step": traj.failed_step}
    if traj.stable:
        U, V = traj.lift(art.basis.Psi_u, art.basis.Psi_v)
        summary["err_u"] = relative_error(U, u_ref)
        summary["err_v"] = relative_error(V, v_ref)
        write_matrix(d / f"reduce-{method}-r{r}-u.rdm", U, [traj.times[-1]])
        write_matrix(d / f"reduce-{method}-r{r}-v.rdm", V, [traj.times[-1]])
        print(f"{method} r={r}: err_u={summary['err_u']:.3e} err_v={summary['err_v']:.3e} "
              f"online={traj.wall_time:.3f}s")
    else:
        print(f"{method} r={r}: unstable (blow-up at step {traj.failed_step})")
    _write_json(d / f"reduce-{method}-r{r}.json", summary)
    return summary


def cmd_sweep(cfg: ExperimentConfig, methods=None) -> ErrorReport:
    """Sweep every configured method over the configured r values."""
    methods = methods or cfg.mor.method_list
    snaps = load_snapshots(cfg)
    art = _build_artifacts(cfg, snaps, methods)
    r_values = [r for r in parse_r_values(cfg.mor.r_values, art.R) if r <= art.R]
    report = sweep(methods, r_values, art, _reference(snaps), workers=cfg.mor.workers)
    sim = json.loads((simulation_dir(cfg) / "simulation.json").read_text())
    report.meta = {"R": art.R, "rank_u": art.basis.rank_u, "rank_v": art.basis.rank_v,
                   "full_wall_time": sim["wall_time"], "full_method": sim["method"]}
    d = run_dir(cfg)
    report.write_csv(d / "sweep.csv")
    jumps = {m: error_jumps(report, m) for m in methods}
    write_manifest(d / "sweep.json", config_hash=cfg.hash, seed=cfg.init.seed, offline=art.timings,
                   extra={"meta": report.meta, "jumps": jumps, "summary": art.summary(),
                          "unstable": {m: report.unstable(m) for m in methods}})
    print(f"sweep: {len(report)} records over r={r_values[0]}..{r_values[-1]} -> {d / 'sweep.csv'}")
    return report


def cmd_adaptive(cfg: ExperimentConfig, methods=None) -> list:
    """Two-zone pipeline; also times the whole-window R-trajectory for the cost ratio."""
    methods = methods or [m for m in cfg.mor.method_list if m in ("podc", "pod-deimc")] or ["podc"]
    snaps = load_snapshots(cfg)
    model, disc, tg, u0, v0 = _setup(cfg)
    ind = json.loads((simulation_dir(cfg) / "indicators.json").read_text())
    a = cfg.adaptive
    need_deim = any(m in ("pod-deim", "pod-deimc") for m in methods)
    split = prepare_adaptive(model, disc, snaps, int(ind["tau_index"]), tg,
                             zone1=ZoneSettings(a.R1, a.ell1), zone2=ZoneSettings(a.R2, a.ell2),
                             zone1_stride=a.zone1_stride, with_deim=need_deim, zone2_start=a.zone2_start,
                             memory_budget=cfg.mor.memory_budget_mb * 2**20)
    whole = _whole_window_cost(cfg, snaps, model, disc, tg, u0, v0, need_deim)
    z1, z2 = split.zones
    u_ref, v_ref = _reference(snaps)
    records = []
    r2_values = [r for r in parse_r_values(cfg.mor.r_values, z2.R) if r <= z2.R]
    r1 = min(a.r1, z1.R)
    for m in methods:
        for r2 in r2_values:
            res = run_adaptive_online(split, model, u0, v0, m, r1, r2, zone1_method=a.zone1_method)
            if res.stable:
                rec = SweepRecord(m, r2, relative_error(res.u_final, u_ref), relative_error(res.v_final, v_ref),
                                  res.online_time, True, zone="adaptive")
            else:
                rec = SweepRecord(m, r2, float("nan"), float("nan"), res.online_time, False, zone="adaptive")
            records.append(rec)
    report = ErrorReport(records)
    d = run_dir(cfg)
    report.write_csv(d / "adaptive.csv")
    ratio = split.offline_correction_time / whole if whole > 0 else float("nan")
    write_manifest(d / "adaptive.json", config_hash=cfg.hash, seed=cfg.init.seed,
                   offline={"adaptive_correction_s": split.offline_correction_time,
                            "whole_correction_s": whole, "ratio": ratio},
                   extra={"split": split.summary(), "r1": r1})
    print(f"adaptive: tau={split.tau:.6g} R1={z1.R} R2={z2.R}; offline correction ratio {ratio:.3f} -> {d}")
    return records


def _whole_window_cost(cfg, snaps, model, disc, tg, u0, v0, with_deim) -> float:
    """Offline correction cost of the non-adaptive pipeline (same stages as a zone)."""
    methods = ("pod-deimc",) if with_deim else ("podc",)
    art = OfflineArtifacts.build(model, disc, snaps, tg, u0, v0, R=cfg.mor.R, ell=cfg.mor.ell,
                                 methods=methods, memory_budget=cfg.mor.memory_budget_mb * 2**20,
                                 kinetics_cache=False)
    return art.offline_correction_time


def cmd_report(cfg: ExperimentConfig) -> int:
    """Print tolerance and timing tables from the stored CSV reports."""
    d = simulation_dir(cfg) / cfg.hash
    found = False
    sim_path = simulation_dir(cfg) / "simulation.json"
    baselines = {}
    if sim_path.exists():
        sim = json.loads(sim_path.read_text())
        baselines[f"full_{sim['method']}"] = sim["wall_time"]
    for name in ("sweep", "adaptive"):
        path = d / f"{name}.csv"
        if not path.exists():
            continue
        found = True
        report = ErrorReport.read_csv(path)
        print(f"== {name} ({path})")
        for m in report.methods():
            unstable = report.unstable(m)
            print(f"-- {m}: {len(report.for_method(m))} runs, unstable r: {unstable or 'none'}")
            for row in tolerance_table(report, m):
                r0 = "-" if row["r0"] is None else row["r0"]
                t = "-" if row["online_s"] is None else f"{row['online_s']:.3f}s"
                print(f"   tol {row['tol']:.0e}: r0={r0} online={t}")
        rows = timing_table(report, baselines)
        out = d / f"{name}-timing.csv"
        if rows:
            with out.open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)
    if not found:
        raise UsageError(f"no reports in {d}; run `rdmor sweep` or `rdmor adaptive` first")
    return EXIT_OK


# -- argument handling -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="INI configuration file")
    src.add_argument("--preset", choices=["schnakenberg", "fhn", "dib"], help="built-in configuration")
    common.add_argument("--full-scale", action="store_true", help="use the full-scale variant of --preset")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--out", type=Path, help="override the output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="rdmor", description="Reduced-order modelling of reaction-diffusion Turing patterns")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("simulate", parents=[common], help="full-order run and snapshots")
    s.add_argument("--method", choices=["matrix", "vector"], default="matrix")
    s.add_argument("--force", action="store_true", help="recompute even if cached")
    s = sub.add_parser("reduce", parents=[common], help="one reduced solve")
    s.add_argument("--method", choices=METHODS, default="podc")
    s.add_argument("--r", type=int, help="reduced dimension (default: R)")
    s = sub.add_parser("sweep", parents=[common], help="error sweep over r")
    s.add_argument("--method", choices=METHODS, action="append", help="restrict to these methods")
    s = sub.add_parser("adaptive", parents=[common], help="two-zone adaptive pipeline")
    s.add_argument("--method", choices=METHODS, action="append", help="zone solvers to run")
    sub.add_parser("report", parents=[common], help="tables from stored reports")
    sub.add_parser("show-config", parents=[common], help="print the resolved configuration")
    return p


def resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"config file {args.config} not found")
        cfg = ExperimentConfig.from_file(args.config)
    elif args.preset is not None:
        cfg = preset(args.preset, full_scale=args.full_scale)
    else:
        raise UsageError("one of --config or --preset is required")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_output(args.out)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "show-config":
            sys.stdout.write(cfg.to_string())
        elif args.command == "simulate":
            cmd_simulate(cfg, args.method, args.force)
        elif args.command == "reduce":
            cmd_reduce(cfg, args.method, args.r)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.method)
        elif args.command == "adaptive":
            cmd_adaptive(cfg, args.method)
        elif args.command == "report":
            cmd_report(cfg)
    except ConfigError as exc:
        print(f"rdmor: config error in {exc.field}: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DimensionError, DomainError, SplitError) as exc:
        print(f"rdmor: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"rdmor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
