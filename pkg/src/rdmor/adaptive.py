"""Two-zone adaptive reduction: reactivity zone ``[0, tau]`` and stabilizing zone ``[tau, T]``."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corrected import (
    DEFAULT_MEMORY_BUDGET,
    CorrectionCoupling,
    offline_R_trajectory,
    solve_pod_deimc,
    solve_podc,
)
from .deim import DeimOperator, build_deim, solve_pod_deim
from .errors import DimensionError, DomainError, SplitError
from .full_solver import SnapshotSet, TimeGrid, run_full
from .pod import GalerkinOperators, PodBasis, RomTrajectory, solve_pod

__all__ = [
    "ZoneSettings",
    "Zone",
    "AdaptiveSplit",
    "AdaptiveResult",
    "split_snapshots",
    "cross_gram",
    "transfer_ic",
    "build_zone",
    "prepare_adaptive",
    "run_zone",
    "run_adaptive_online",
    "METHODS",
]

log = logging.getLogger(__name__)

METHODS = ("pod", "podc", "pod-deim", "pod-deimc")

# offline stages counted as the cost of building a corrected model
CORRECTION_STAGES = ("svd", "operators", "deim", "R_trajectory")


def split_snapshots(snapshots: SnapshotSet, tau_index: int):
    """Columns ``0..tau_index`` and ``tau_index..end``; the tau column is shared."""
    m = snapshots.m
    if not 0 < tau_index < m - 1:
        raise SplitError(f"tau index {tau_index} leaves a degenerate zone (columns 0..{m - 1})")
    return snapshots.columns(0, tau_index + 1), snapshots.columns(tau_index, m)


def cross_gram(Psi_from: np.ndarray, Psi_to: np.ndarray) -> np.ndarray:
    """``Psi_to^T Psi_from``: maps reduced coordinates between two subspaces."""
    return Psi_to.T @ Psi_from


def transfer_ic(Psi_from, Psi_to, state, gram=None):
    """Lift ``state`` to the full space and project it onto ``Psi_to``."""
    G = cross_gram(Psi_from, Psi_to) if gram is None else gram
    out = G @ state
    norm_in = np.linalg.norm(state)
    if norm_in > 0 and np.linalg.norm(out) <= 1e-12 * norm_in:
        warnings.warn("initial condition lost in transfer: target subspace is orthogonal", stacklevel=2)
    return out


@dataclass
class ZoneSettings:
    """Per-zone overrides; ``None`` means the zone's numerical rank.

    Values above the zone's rank are clamped to it.
    """

    R: int | None = None
    ell: int | None = None


@dataclass(eq=False)
class Zone:
    index: int
    step_start: int
    step_end: int
    h_t: float
    snapshots: SnapshotSet
    basis: PodBasis
    ops: GalerkinOperators
    deim: DeimOperator | None
    coupling: CorrectionCoupling | None
    timings: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.step_end - self.step_start

    @property
    def t_start(self) -> float:
        return self.step_start * self.h_t

    @property
    def t_end(self) -> float:
        return self.step_end * self.h_t

    @property
    def R(self) -> int:
        return self.basis.R

    @property
    def offline_correction_time(self) -> float:
        """SVD, operator, DEIM and R-trajectory time for this zone."""
        return float(sum(self.timings.get(k, 0.0) for k in CORRECTION_STAGES))

    def summary(self) -> dict:
        return {
            "zone": self.index,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "columns": self.snapshots.m,
            "rank_u": self.basis.rank_u,
            "rank_v": self.basis.rank_v,
            "R": self.R,
            "ell": None if self.deim is None else self.deim.ell,
            "rho_kin": None if self.deim is None else self.deim.rho_kin,
            "timings": dict(self.timings),
        }


def build_zone(index, model, disc, snapshots: SnapshotSet, u_start, v_start, step_start, step_end, h_t,
               settings: ZoneSettings | None = None, *, with_deim=True, with_correction=True,
               memory_budget=DEFAULT_MEMORY_BUDGET) -> Zone:
    """Offline stage for one zone: POD bases, operators, DEIM and the R-trajectory.

    ``u_start``/``v_start`` are full-space fields at the zone's first
    step; the R-dimensional POD run starts from their projection.
    """
    settings = settings or ZoneSettings()
    timings = {}
    basis = PodBasis.from_snapshots(snapshots.S_u, snapshots.S_v)
    timings["svd"] = basis.svd_time
    if settings.R is not None:
        if settings.R < basis.R:
            basis = basis.truncate(settings.R)
        elif settings.R > basis.R:
            log.info("zone %d: R=%d clamped to the zone rank %d", index, settings.R, basis.R)
    t0 = time.perf_counter()
    ops = GalerkinOperators(disc, basis)
    timings["operators"] = time.perf_counter() - t0
    deim = None
    if with_deim:
        deim = build_deim(snapshots.S_f, snapshots.S_g, basis, settings.ell, clamp=True)
        timings["deim"] = deim.build_time
    coupling = None
    if with_correction:
        traj = offline_R_trajectory(ops, model, step_end - step_start, h_t, u_start, v_start,
                                    t0=step_start * h_t, memory_budget=memory_budget)
        timings["R_trajectory"] = traj.wall_time
        coupling = CorrectionCoupling(ops, traj, deim)
    log.info("zone %d: columns=%d R=%d ell=%s timings=%s", index, snapshots.m, basis.R,
             None if deim is None else deim.ell, timings)
    return Zone(index, step_start, step_end, h_t, snapshots, basis, ops, deim, coupling, timings)


@dataclass(eq=False)
class AdaptiveSplit:
    tau: float
    tau_index: int
    tau_step: int
    zones: tuple

    @property
    def offline_correction_time(self) -> float:
        return sum(z.offline_correction_time for z in self.zones)

    def summary(self) -> dict:
        return {
            "tau": self.tau,
            "tau_index": self.tau_index,
            "tau_step": self.tau_step,
            "zones": [z.summary() for z in self.zones],
            "offline_correction_time": self.offline_correction_time,
        }


def prepare_adaptive(model, disc, snapshots: SnapshotSet, tau_index: int, timegrid: TimeGrid, *,
                     zone1: ZoneSettings | None = None, zone2: ZoneSettings | None = None,
                     zone1_stride: int | None = None, with_deim=True, with_correction=True,
                     zone2_start: str = "transfer",
                     memory_budget=DEFAULT_MEMORY_BUDGET) -> AdaptiveSplit:
    """Offline stage of the adaptive algorithm.

    ``tau_index`` is the snapshot column of the increment maximum, computed
    once from the full-order snapshots.  With ``zone1_stride`` smaller than
    the snapshot stride, the reactivity zone is re-simulated from the
    initial state and sampled more densely.

    ``zone2_start`` selects the start of the zone-2 R-trajectory:
    ``"transfer"`` lifts the zone-1 R-trajectory at tau (what the online
    hand-off sees), ``"snapshot"`` uses the full-order state at tau.  The
    corrected models only damp a start mismatch through diffusion, so the
    constant mode of any offset between the zone-2 initial state and the
    R-trajectory survives to ``T``; the transferred start avoids one.
    """
    if zone2_start not in ("transfer", "snapshot"):
        raise DomainError(f"zone2_start must be 'transfer' or 'snapshot', got {zone2_start!r}")
    snap1, snap2 = split_snapshots(snapshots, tau_index)
    tau_step = int(snapshots.steps[tau_index])
    h = timegrid.h_t
    if zone1_stride is not None and zone1_stride != snapshots.stride:
        if tau_step % zone1_stride:
            raise DomainError(f"zone-1 stride {zone1_stride} does not divide the tau step {tau_step}")
        rerun = run_full(model, disc, TimeGrid(tau_step * h, h), snapshots.S_u[:, 0], snapshots.S_v[:, 0],
                         zone1_stride)
        snap1 = rerun.snapshots
    z1 = build_zone(1, model, disc, snap1, snapshots.S_u[:, 0], snapshots.S_v[:, 0], 0, tau_step, h, zone1,
                    with_deim=with_deim, with_correction=with_correction, memory_budget=memory_budget)
    if zone2_start == "transfer" and z1.coupling is not None:
        traj1 = z1.coupling.trajectory
        start2 = (z1.basis.Psi_u @ traj1.u[-1], z1.basis.Psi_v @ traj1.v[-1])
    else:
        start2 = (snapshots.S_u[:, tau_index], snapshots.S_v[:, tau_index])
    z2 = build_zone(2, model, disc, snap2, start2[0], start2[1],
                    tau_step, timegrid.n_t, h, zone2, with_deim=with_deim,
                    with_correction=with_correction, memory_budget=memory_budget)
    return AdaptiveSplit(float(snapshots.times[tau_index]), tau_index, tau_step, (z1, z2))


def run_zone(zone: Zone, method: str, r: int, model, u0r, v0r, store_every=0) -> RomTrajectory:
    """Online integration of one zone with reduced initial state ``(u0r, v0r)``."""
    if method not in METHODS:
        raise DomainError(f"unknown reduction method {method!r}")
    if not 0 < r <= zone.R:
        raise DimensionError(f"r={r} outside 1..{zone.R} in zone {zone.index}")
    if method in ("podc", "pod-deimc") and zone.coupling is None:
        raise DomainError(f"zone {zone.index} was prepared without the correction")
    if method in ("pod-deim", "pod-deimc") and zone.deim is None:
        raise DomainError(f"zone {zone.index} was prepared without DEIM")
    if method == "podc":
        return solve_podc(zone.coupling, r, model, u0r, v0r, store_every=store_every)
    if method == "pod-deimc":
        return solve_pod_deimc(zone.coupling, r, model, u0r, v0r, store_every=store_every)
    rom = zone.ops.rom(r)
    t0 = zone.t_start
    if method == "pod":
        return solve_pod(rom, model, zone.n_steps, zone.h_t, u0r, v0r, t0=t0, store_every=store_every)
    return solve_pod_deim(rom, zone.deim, model, zone.n_steps, zone.h_t, u0r, v0r, t0=t0,
                          store_every=store_every)


@dataclass(eq=False)
class AdaptiveResult:
    method: str
    r1: int
    r2: int
    zone1: RomTrajectory
    zone2: RomTrajectory | None
    u_tau: np.ndarray | None
    v_tau: np.ndarray | None
    u_final: np.ndarray | None
    v_final: np.ndarray | None
    transfer_defect_u: float
    transfer_defect_v: float
    online_time: float

    @property
    def stable(self) -> bool:
        return self.zone1.stable and self.zone2 is not None and self.zone2.stable


def run_adaptive_online(split: AdaptiveSplit, model, u0, v0, method: str, r1: int, r2: int, *,
                        zone1_method: str | None = None, store_every=0) -> AdaptiveResult:
    """Zone-1 solve, transfer at tau, zone-2 solve.

    The zone-1 solver defaults to the same family as ``method``.  The transfer
    defect is ``||(I - Psi2 Psi2^T) Psi1 u1(tau)||``, the part of the zone-1
    state lost when projecting onto the zone-2 subspace.
    """
    z1, z2 = split.zones
    m1 = zone1_method or method
    b1, b2 = z1.basis.truncate(r1), z2.basis.truncate(r2)
    u1, v1 = b1.Psi_u.T @ u0, b1.Psi_v.T @ v0
    traj1 = run_zone(z1, m1, r1, model, u1, v1, store_every)
    online = traj1.wall_time
    if not traj1.stable:
        nan = float("nan")
        return AdaptiveResult(method, r1, r2, traj1, None, None, None, None, None, nan, nan, online)
    w_u, w_v = b1.Psi_u @ traj1.final_u, b1.Psi_v @ traj1.final_v
    u2 = transfer_ic(b1.Psi_u, b2.Psi_u, traj1.final_u)
    v2 = transfer_ic(b1.Psi_v, b2.Psi_v, traj1.final_v)
    defect_u = float(np.linalg.norm(w_u - b2.Psi_u @ u2))
    defect_v = float(np.linalg.norm(w_v - b2.Psi_v @ v2))
    traj2 = run_zone(z2, method, r2, model, u2, v2, store_every)
    online += traj2.wall_time
    if traj2.stable:
        uf, vf = b2.Psi_u @ traj2.final_u, b2.Psi_v @ traj2.final_v
    else:
        uf = vf = None
    return AdaptiveResult(method, r1, r2, traj1, traj2, w_u, w_v, uf, vf, defect_u, defect_v, online)
