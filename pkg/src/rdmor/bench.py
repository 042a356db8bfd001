"""Error metrics, r-sweeps over shared offline artifacts, and timing tables."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import CORRECTION_STAGES, METHODS
from .corrected import DEFAULT_MEMORY_BUDGET, CorrectionCoupling, offline_R_trajectory, solve_pod_deimc, solve_podc
from .deim import DeimOperator, build_deim, solve_pod_deim
from .errors import DimensionError, DomainError, RdmorError
from .full_solver import SnapshotSet, TimeGrid
from .pod import GalerkinOperators, PodBasis, RomTrajectory, solve_pod

__all__ = [
    "METHODS",
    "relative_error",
    "OfflineArtifacts",
    "run_method",
    "SweepRecord",
    "ErrorReport",
    "sweep",
    "error_jumps",
    "tolerance_table",
    "timing_table",
    "write_manifest",
]

log = logging.getLogger(__name__)

DEFAULT_TOLERANCES = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def relative_error(candidate, reference) -> float:
    """``||candidate - reference||_F / ||reference||_F``."""
    candidate = np.asarray(candidate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if candidate.shape != reference.shape:
        raise DimensionError(f"shape mismatch {candidate.shape} vs {reference.shape}")
    den = np.linalg.norm(reference)
    if den == 0.0:
        raise DomainError("relative error against a zero reference")
    return float(np.linalg.norm(candidate - reference) / den)


@dataclass(eq=False)
class OfflineArtifacts:
    """Everything a sweep shares: basis, operators, DEIM and the R-trajectory coupling."""

    model: object
    timegrid: TimeGrid
    u0: np.ndarray
    v0: np.ndarray
    basis: PodBasis
    ops: GalerkinOperators
    deim: DeimOperator | None
    coupling: CorrectionCoupling | None
    timings: dict = field(default_factory=dict)

    @property
    def R(self) -> int:
        return self.basis.R

    @property
    def offline_correction_time(self) -> float:
        """SVD, operator, DEIM and R-trajectory time; the same stages a zone counts."""
        return float(sum(self.timings.get(k, 0.0) for k in CORRECTION_STAGES))

    @classmethod
    def build(cls, model, disc, snapshots: SnapshotSet, timegrid: TimeGrid, u0, v0, *, R=None, ell=None,
              methods=METHODS, memory_budget=DEFAULT_MEMORY_BUDGET, kinetics_cache=True) -> "OfflineArtifacts":
        """Build only what ``methods`` need; timings are logged per stage.

        With ``kinetics_cache`` (and PODc among the methods) the projected
        kinetics of the R-trajectory are precomputed so PODc runs in a sweep
        share them.
        """
        unknown = set(methods) - set(METHODS)
        if unknown:
            raise DomainError(f"unknown methods {sorted(unknown)}")
        timings = {}
        basis = PodBasis.from_snapshots(snapshots.S_u, snapshots.S_v, R)
        timings["svd"] = basis.svd_time
        t0 = time.perf_counter()
        ops = GalerkinOperators(disc, basis)
        timings["operators"] = time.perf_counter() - t0
        deim = None
        if {"pod-deim", "pod-deimc"} & set(methods):
            deim = build_deim(snapshots.S_f, snapshots.S_g, basis, ell)
            timings["deim"] = deim.build_time
        coupling = None
        if {"podc", "pod-deimc"} & set(methods):
            traj = offline_R_trajectory(ops, model, timegrid.n_t, timegrid.h_t, u0, v0,
                                        memory_budget=memory_budget)
            timings["R_trajectory"] = traj.wall_time
            coupling = CorrectionCoupling(ops, traj, deim)
            if kinetics_cache and "podc" in methods:
                coupling.projected_kinetics(model)
                timings["kinetics_cache"] = coupling.kinetics_time
        return cls(model, timegrid, np.asarray(u0), np.asarray(v0), basis, ops, deim, coupling, timings)

    def summary(self) -> dict:
        out = {"rank_u": self.basis.rank_u, "rank_v": self.basis.rank_v, "R": self.R,
               "timings": dict(self.timings)}
        if self.deim is not None:
            out["deim"] = self.deim.summary()
        return out


def run_method(art: OfflineArtifacts, method: str, r: int, store_every=0) -> RomTrajectory:
    """One reduced solve over the whole time window."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    if not 0 < r <= art.R:
        raise DimensionError(f"r={r} outside 1..{art.R}")
    rom = art.ops.rom(r)
    u0r, v0r = rom.reduce(art.u0, art.v0)
    tg, model = art.timegrid, art.model
    if method == "pod":
        return solve_pod(rom, model, tg.n_t, tg.h_t, u0r, v0r, store_every=store_every)
    if method == "pod-deim":
        if art.deim is None:
            raise DomainError("artifacts were built without DEIM")
        return solve_pod_deim(rom, art.deim, model, tg.n_t, tg.h_t, u0r, v0r, store_every=store_every)
    if art.coupling is None:
        raise DomainError("artifacts were built without the correction")
    if method == "podc":
        return solve_podc(art.coupling, r, model, u0r, v0r, store_every=store_every)
    return solve_pod_deimc(art.coupling, r, model, u0r, v0r, store_every=store_every)


@dataclass(frozen=True)
class SweepRecord:
    """Final-time relative errors of one (method, r) run; NaN errors when unstable."""

    method: str
    r: int
    err_u: float
    err_v: float
    online_s: float
    stable: bool
    failed_step: int | None = None
    zone: str | None = None

    def as_row(self) -> dict:
        return {"method": self.method, "r": self.r, "err_u": self.err_u, "err_v": self.err_v,
                "online_s": self.online_s, "stable": self.stable}


@dataclass
class ErrorReport:
    records: list = field(default_factory=list)
    offline: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda rec: (rec.method, rec.r))

    def __len__(self):
        return len(self.records)

    def methods(self) -> list:
        return sorted({rec.method for rec in self.records})

    def for_method(self, method: str) -> list:
        return [rec for rec in self.records if rec.method == method]

    def record(self, method: str, r: int) -> SweepRecord:
        for rec in self.records:
            if rec.method == method and rec.r == r:
                return rec
        raise KeyError((method, r))

    def series(self, method: str, variable="u"):
        """``(r, err)`` arrays sorted by ``r``; unstable runs give NaN."""
        recs = self.for_method(method)
        r = np.array([rec.r for rec in recs], dtype=int)
        err = np.array([getattr(rec, f"err_{variable}") if rec.stable else np.nan for rec in recs])
        return r, err

    def unstable(self, method: str) -> list:
        return [rec.r for rec in self.for_method(method) if not rec.stable]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["method", "r", "err_u", "err_v", "online_s", "stable"])
            w.writeheader()
            for rec in self.records:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.as_row().items()})
        return path

    @classmethod
    def read_csv(cls, path) -> "ErrorReport":
        recs = []
        with Path(path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                recs.append(SweepRecord(row["method"], int(row["r"]), float(row["err_u"]), float(row["err_v"]),
                                        float(row["online_s"]), row["stable"] == "True"))
        return cls(recs)

    def to_dict(self) -> dict:
        return {"records": [asdict(rec) for rec in self.records], "offline": self.offline, "meta": self.meta}


def _one_run(art, method, r, reference):
    u_ref, v_ref = reference
    try:
        traj = run_method(art, method, r)
    except (RdmorError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("%s r=%d failed: %s", method, r, exc)
        return SweepRecord(method, r, math.nan, math.nan, 0.0, False)
    if not traj.stable:
        return SweepRecord(method, r, math.nan, math.nan, traj.wall_time, False, traj.failed_step)
    U, V = traj.lift(art.basis.Psi_u, art.basis.Psi_v)
    return SweepRecord(method, r, relative_error(U, u_ref), relative_error(V, v_ref), traj.wall_time, True)


def sweep(methods, r_values, art: OfflineArtifacts, reference, *, workers: int = 1) -> ErrorReport:
    """Run every ``(method, r)`` against the full-order final state ``reference = (u*, v*)``.

    Failures are recorded as unstable and never abort the sweep.  With
    ``workers > 1`` runs go to a thread pool; the artifacts are read-only
    during the sweep (the kinetics cache is filled at build time).
    """
    jobs = [(m, int(r)) for m in methods for r in r_values]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda job: _one_run(art, job[0], job[1], reference), jobs))
    else:
        records = []
        for m, r in jobs:
            rec = _one_run(art, m, r, reference)
            log.info("%-9s r=%3d err_u=%.3e stable=%s %.2fs", m, r, rec.err_u, rec.stable, rec.online_s)
            records.append(rec)
    return ErrorReport(records, offline=dict(art.timings))


def error_jumps(report: ErrorReport, method: str, factor: float = 10.0, variable="u"):
    """Consecutive-r pairs whose error grows by at least ``factor``.

    A stable run followed by an unstable one counts as an infinite jump.
    """
    r, err = report.series(method, variable)
    jumps = []
    for i in range(1, r.size):
        a, b = err[i - 1], err[i]
        if np.isnan(a):
            continue
        ratio = math.inf if np.isnan(b) else (b / a if a > 0 else (math.inf if b > 0 else 1.0))
        if ratio >= factor:
            jumps.append((int(r[i - 1]), int(r[i]), float(ratio)))
    return jumps


def tolerance_table(report: ErrorReport, method: str, tolerances=DEFAULT_TOLERANCES, variable="u"):
    """Smallest ``r0`` with error ``<= tol`` for every swept ``r >= r0``, with its online time."""
    r, err = report.series(method, variable)
    rows = []
    for tol in tolerances:
        ok = np.where(np.isnan(err), False, err <= tol)
        r0 = None
        for i in range(r.size - 1, -1, -1):
            if not ok[i]:
                break
            r0 = i
        if r0 is None:
            rows.append({"tol": tol, "r0": None, "online_s": None})
        else:
            rows.append({"tol": tol, "r0": int(r[r0]), "online_s": report.record(method, int(r[r0])).online_s})
    return rows


def timing_table(report: ErrorReport, baselines: dict | None = None):
    """Online time per (method, r) with speed-up factors against full-solver baselines."""
    baselines = baselines or {}
    rows = []
    for rec in report.records:
        row = {"method": rec.method, "r": rec.r, "online_s": rec.online_s, "stable": rec.stable}
        for name, t in baselines.items():
            row[f"speedup_{name}"] = t / rec.online_s if rec.online_s > 0 else math.inf
        rows.append(row)
    return rows


def write_manifest(path, *, config_hash: str, seed: int, offline: dict, extra: dict | None = None) -> Path:
    path = Path(path)
    doc = {"config_hash": config_hash, "seed": seed, "offline": offline}
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default))
    return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
