"""Corrected reduced models (PODc, POD-DEIMc) driven by an R-dimensional POD trajectory."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .deim import DeimOperator
from .errors import DimensionError, DivergenceError, DomainError
from .kinetics import KineticsModel
from .pod import GalerkinOperators, RomTrajectory, imex_inverse, integrate_reduced, solve_pod

__all__ = [
    "OfflineTrajectory",
    "CorrectionCoupling",
    "offline_R_trajectory",
    "correction_terms",
    "corrected_drive",
    "solve_podc",
    "solve_pod_deimc",
    "DEFAULT_MEMORY_BUDGET",
]

DEFAULT_MEMORY_BUDGET = 512 * 2**20


@dataclass(eq=False)
class OfflineTrajectory:
    """Reduced POD solution of dimension ``R`` used to build the correction.

    States are kept at local steps ``0, stride, 2 stride, ...`` plus the
    last one; in-between steps are linearly interpolated in time.
    """

    u: np.ndarray  # (n_stored, R)
    v: np.ndarray
    steps: np.ndarray
    stride: int
    n_steps: int
    h_t: float
    t0: float
    wall_time: float

    @property
    def R(self) -> int:
        return self.u.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h_t * self.steps

    def at(self, k: int):
        return self.interpolate(k, self.u, self.v)

    def interpolate(self, k: int, a: np.ndarray, b: np.ndarray):
        """Rows of ``a`` and ``b`` (indexed like the stored states) at local step ``k``."""
        if not 0 <= k <= self.n_steps:
            raise DomainError(f"step {k} outside the offline window 0..{self.n_steps}")
        if self.stride == 1:
            return a[k], b[k]
        j, rem = divmod(k, self.stride)
        if rem == 0 or j + 1 >= self.steps.size:
            return a[j], b[j]
        w = rem / (self.steps[j + 1] - self.steps[j])
        return (1 - w) * a[j] + w * a[j + 1], (1 - w) * b[j] + w * b[j + 1]


def offline_R_trajectory(ops: GalerkinOperators, model: KineticsModel, n_steps: int, h_t: float,
                         u0, v0, *, t0=0.0, memory_budget=DEFAULT_MEMORY_BUDGET) -> OfflineTrajectory:
    """Solve the plain POD system at the full basis dimension ``R``.

    ``u0``/``v0`` are full-space initial fields.  Storage is every step when
    ``2 (n_steps + 1) R`` doubles fit in ``memory_budget`` bytes, otherwise the
    smallest stride that fits.  A blow-up raises :class:`DivergenceError`.
    """
    R = ops.R
    need = 2 * (n_steps + 1) * R * 8
    stride = max(1, int(np.ceil(need / memory_budget)))
    rom = ops.rom(R)
    u0r, v0r = rom.reduce(u0, v0)
    traj = solve_pod(rom, model, n_steps, h_t, u0r, v0r, t0=t0, store_every=stride)
    if not traj.stable:
        raise DivergenceError(traj.failed_step, f"offline POD trajectory, R={R}")
    steps = np.rint((traj.times - t0) / h_t).astype(np.int64)
    return OfflineTrajectory(traj.u, traj.v, steps, stride, n_steps, h_t, t0, traj.wall_time)


@dataclass(eq=False)
class CorrectionCoupling:
    """Offline ingredients of the corrected models for one basis of dimension ``R``."""

    ops: GalerkinOperators
    trajectory: OfflineTrajectory
    deim: DeimOperator | None = None
    _kinetics: tuple | None = field(default=None, init=False, repr=False)
    kinetics_time: float = field(default=0.0, init=False)

    def __post_init__(self):
        if self.trajectory.R != self.ops.R:
            raise DimensionError("offline trajectory and basis dimensions differ")
        if self.deim is not None and self.deim.R != self.ops.R:
            raise DimensionError("DEIM operator was built for a different basis dimension")

    @property
    def R(self) -> int:
        return self.ops.R

    def cross(self, r):
        """``(Psi_u^r)^T A Psi_u^R`` and ``(Psi_v^r)^T A Psi_v^R``."""
        return self.ops.AR_u[:r], self.ops.AR_v[:r]

    def projected_kinetics(self, model: KineticsModel, block=512):
        """``Psi^T f(Psi u_R, Psi v_R)`` (and ``g``) at every stored step, shape ``(n_stored, R)``.

        The first ``r`` columns are the reaction drive of any PODc model of
        dimension ``r``, so the lift to the full grid is done once, in blocks.
        """
        if self._kinetics is not None and self._kinetics[0] is model:
            return self._kinetics[1], self._kinetics[2]
        t0 = time.perf_counter()
        basis = self.ops.basis
        U, V = self.trajectory.u, self.trajectory.v
        Fp = np.empty_like(U)
        Gp = np.empty_like(V)
        for s in range(0, U.shape[0], block):
            Uf = U[s:s + block] @ basis.Psi_u.T
            Vf = V[s:s + block] @ basis.Psi_v.T
            Fp[s:s + block] = model.f(Uf, Vf) @ basis.Psi_u
            Gp[s:s + block] = model.g(Uf, Vf) @ basis.Psi_v
        self.kinetics_time = time.perf_counter() - t0
        self._kinetics = (model, Fp, Gp)
        return Fp, Gp


def _lift(basis, ur, vr):
    r = ur.shape[0]
    return basis.Psi_u[:, :r] @ ur, basis.Psi_v[:, :r] @ vr


def correction_terms(ur, vr, uR, vR, coupling: CorrectionCoupling, model: KineticsModel):
    """``f_c, g_c``: projected difference of the full right-hand sides at the R- and r-lifts."""
    r = ur.shape[0]
    if r > coupling.R or uR.shape[0] != coupling.R:
        raise DimensionError(f"need r <= R = {coupling.R}")
    basis = coupling.ops.basis
    cu, cv = coupling.cross(r)
    A_r, B_r = coupling.ops.AR_u[:r, :r], coupling.ops.AR_v[:r, :r]
    UR, VR = _lift(basis, uR, vR)
    Ur, Vr = _lift(basis, ur, vr)
    PuT, PvT = basis.Psi_u[:, :r].T, basis.Psi_v[:, :r].T
    f_c = model.d_u * (cu @ uR - A_r @ ur) + PuT @ (model.f(UR, VR) - model.f(Ur, Vr))
    g_c = model.d_v * (cv @ vR - B_r @ vr) + PvT @ (model.g(UR, VR) - model.g(Ur, Vr))
    return f_c, g_c


def corrected_drive(uR, vR, r, coupling: CorrectionCoupling, model: KineticsModel, use_deim=False):
    """Right-hand side of the cancelled corrected system at one instant."""
    cu, cv = coupling.cross(r)
    if use_deim:
        D = coupling.deim
        fl = model.f(D.Pf_Psi_u @ uR, D.Pf_Psi_v @ vR)
        gl = model.g(D.Pg_Psi_u @ uR, D.Pg_Psi_v @ vR)
        return (model.d_u * (cu @ uR) + D.PsiT_PhiD_f[:r] @ fl,
                model.d_v * (cv @ vR) + D.PsiT_PhiD_g[:r] @ gl)
    basis = coupling.ops.basis
    UR, VR = _lift(basis, uR, vR)
    return (model.d_u * (cu @ uR) + basis.Psi_u[:, :r].T @ model.f(UR, VR),
            model.d_v * (cv @ vR) + basis.Psi_v[:, :r].T @ model.g(UR, VR))


def _check_r(r, coupling):
    if not 0 < r <= coupling.R:
        raise DimensionError(f"reduced dimension r={r} outside 1..{coupling.R}")


def solve_podc(coupling: CorrectionCoupling, r: int, model: KineticsModel, u0r, v0r, *,
               n_steps=None, store_every=0, raise_on_blowup=False, cached=True) -> RomTrajectory:
    """PODc: IMEX with ``d A_r u_r`` implicit and reaction plus correction explicit.

    The explicit part is ``d (A^{rR} u_R - A_r u_r) + (Psi^r)^T f(Psi^R u_R, Psi^R v_R)``,
    the cancelled form of reaction plus correction.  The linear difference is
    formed first so that at ``r == R`` the scheme reproduces plain POD.

    With ``cached`` the projected kinetics of the R-trajectory come from
    :meth:`CorrectionCoupling.projected_kinetics`; otherwise they are
    recomputed on the full grid at every step.
    """
    _check_r(r, coupling)
    traj = coupling.trajectory
    n_steps = traj.n_steps if n_steps is None else n_steps
    cu = np.ascontiguousarray(coupling.ops.AR_u[:r])
    cv = np.ascontiguousarray(coupling.ops.AR_v[:r])
    A_r = coupling.ops.AR_u[:r, :r].copy()
    B_r = coupling.ops.AR_v[:r, :r].copy()
    du, dv, f, g = model.d_u, model.d_v, model.f, model.g
    at = traj.at

    if cached:
        Fp, Gp = coupling.projected_kinetics(model)
        Fp = np.ascontiguousarray(Fp[:, :r])
        Gp = np.ascontiguousarray(Gp[:, :r])
        drive = traj.interpolate

        def explicit(k, ur, vr):
            uR, vR = at(k)
            fk, gk = drive(k, Fp, Gp)
            return du * (cu @ uR - A_r @ ur) + fk, dv * (cv @ vR - B_r @ vr) + gk
    else:
        basis = coupling.ops.basis
        PuR = np.ascontiguousarray(basis.Psi_u)
        PvR = np.ascontiguousarray(basis.Psi_v)
        PuT = basis.Psi_u[:, :r].T.copy()
        PvT = basis.Psi_v[:, :r].T.copy()

        def explicit(k, ur, vr):
            uR, vR = at(k)
            U = PuR @ uR
            V = PvR @ vR
            return (du * (cu @ uR - A_r @ ur) + PuT @ f(U, V),
                    dv * (cv @ vR - B_r @ vr) + PvT @ g(U, V))

    Minv_u = imex_inverse(A_r, du, traj.h_t)
    Minv_v = imex_inverse(B_r, dv, traj.h_t)
    return integrate_reduced(explicit, Minv_u, Minv_v, u0r, v0r, n_steps, traj.h_t, t0=traj.t0,
                             method="podc", store_every=store_every, raise_on_blowup=raise_on_blowup)


def solve_pod_deimc(coupling: CorrectionCoupling, r: int, model: KineticsModel, u0r, v0r, *,
                    n_steps=None, store_every=0, raise_on_blowup=False) -> RomTrajectory:
    """POD-DEIMc: as :func:`solve_podc` with DEIM-interpolated kinetics of the R-lift.

    Every per-step product is ``ell x R`` or ``r x ell``; nothing of size ``n``
    is touched online.
    """
    _check_r(r, coupling)
    if coupling.deim is None:
        raise DomainError("coupling was built without a DEIM operator")
    D = coupling.deim
    traj = coupling.trajectory
    n_steps = traj.n_steps if n_steps is None else n_steps
    Fu, Fv, Gu, Gv = D.Pf_Psi_u, D.Pf_Psi_v, D.Pg_Psi_u, D.Pg_Psi_v
    Ef = np.ascontiguousarray(D.PsiT_PhiD_f[:r])
    Eg = np.ascontiguousarray(D.PsiT_PhiD_g[:r])
    cu = np.ascontiguousarray(coupling.ops.AR_u[:r])
    cv = np.ascontiguousarray(coupling.ops.AR_v[:r])
    A_r = coupling.ops.AR_u[:r, :r].copy()
    B_r = coupling.ops.AR_v[:r, :r].copy()
    du, dv, f, g = model.d_u, model.d_v, model.f, model.g
    at = traj.at

    def explicit(k, ur, vr):
        uR, vR = at(k)
        return (du * (cu @ uR - A_r @ ur) + Ef @ f(Fu @ uR, Fv @ vR),
                dv * (cv @ vR - B_r @ vr) + Eg @ g(Gu @ uR, Gv @ vR))

    Minv_u = imex_inverse(A_r, du, traj.h_t)
    Minv_v = imex_inverse(B_r, dv, traj.h_t)
    return integrate_reduced(explicit, Minv_u, Minv_v, u0r, v0r, n_steps, traj.h_t, t0=traj.t0,
                             method="pod-deimc", store_every=store_every,
                             raise_on_blowup=raise_on_blowup)
