"""Discrete empirical interpolation of the kinetics (pivoted-QR point selection)."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, SelectionError
from .kinetics import KineticsModel
from .pod import (
    PodBasis,
    RomSpec,
    imex_inverse,
    integrate_reduced,
    left_singular_vectors,
    rank_from_singular_values,
)

__all__ = ["DeimOperator", "deim_points", "build_deim", "solve_pod_deim"]

log = logging.getLogger(__name__)


def deim_points(Phi: np.ndarray) -> np.ndarray:
    """Row indices of ``Phi`` chosen by QR with column pivoting of ``Phi^T``."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[1] == 0:
        raise DimensionError("need an (n, ell) basis with ell >= 1")
    n, ell = Phi.shape
    if ell > n:
        raise DimensionError(f"cannot pick {ell} points from {n} rows")
    Rfac, piv = sla.qr(Phi.T, mode="r", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(Rfac))
    if diag[0] == 0 or diag[ell - 1] <= n * np.finfo(float).eps * diag[0]:
        raise SelectionError(f"basis is rank deficient; pivot {ell} is {diag[ell - 1]:.3e}")
    return np.asarray(piv[:ell], dtype=np.intp)


@dataclass(eq=False)
class DeimOperator:
    """DEIM data for ``f`` and ``g`` paired with a POD basis of dimension ``R``.

    All products with the POD basis are stored at dimension ``R``; a
    rank-``r`` solve uses the leading ``r`` rows/columns.
    """

    Phi_f: np.ndarray
    Phi_g: np.ndarray
    idx_f: np.ndarray
    idx_g: np.ndarray
    PhiD_f: np.ndarray
    PhiD_g: np.ndarray
    PsiT_PhiD_f: np.ndarray  # Psi_u^T Phi_f^D, (R, ell)
    PsiT_PhiD_g: np.ndarray  # Psi_v^T Phi_g^D, (R, ell)
    Pf_Psi_u: np.ndarray  # (ell, R)
    Pf_Psi_v: np.ndarray
    Pg_Psi_u: np.ndarray
    Pg_Psi_v: np.ndarray
    rank_f: int
    rank_g: int
    cond_f: float
    cond_g: float
    build_time: float = 0.0

    @property
    def ell(self) -> int:
        return self.idx_f.size

    @property
    def rho_kin(self) -> int:
        return max(self.rank_f, self.rank_g)

    @property
    def R(self) -> int:
        return self.Pf_Psi_u.shape[1]

    def interpolate_f(self, w):
        """Oblique DEIM projection ``Phi_f^D P_f^T w``."""
        return self.PhiD_f @ np.asarray(w)[self.idx_f]

    def interpolate_g(self, w):
        return self.PhiD_g @ np.asarray(w)[self.idx_g]

    def summary(self) -> dict:
        return {
            "ell": self.ell,
            "rank_f": self.rank_f,
            "rank_g": self.rank_g,
            "cond_f": self.cond_f,
            "cond_g": self.cond_g,
            "indices_f": self.idx_f.tolist(),
            "indices_g": self.idx_g.tolist(),
        }


def _interpolation_basis(Phi, idx):
    PtPhi = Phi[idx, :]
    cond = float(np.linalg.cond(PtPhi))
    if not np.isfinite(cond):
        raise SelectionError("P^T Phi is singular")
    # Phi (P^T Phi)^{-1} via a solve with the transposed system
    PhiD = sla.solve(PtPhi.T, Phi.T, check_finite=False).T
    return np.ascontiguousarray(PhiD), cond


def build_deim(S_f, S_g, basis: PodBasis, ell: int | None = None, *, clamp: bool = False) -> DeimOperator:
    """DEIM bases from kinetics snapshots plus every product needed online.

    ``ell`` defaults to the larger numerical rank of ``S_f`` and ``S_g``; the
    same ``ell`` is used for both kinetics.  With ``clamp`` a larger ``ell``
    is cut back to that rank.
    """
    t0 = time.perf_counter()
    need = 0 if ell is None else ell
    Uf, sigma_f = left_singular_vectors(S_f, need)
    Ug, sigma_g = left_singular_vectors(S_g, need)
    rank_f = rank_from_singular_values(sigma_f, S_f.shape)
    rank_g = rank_from_singular_values(sigma_g, S_g.shape)
    if ell is None:
        ell = max(rank_f, rank_g)
    elif clamp and ell > max(rank_f, rank_g):
        log.info("ell=%d clamped to the kinetics rank %d", ell, max(rank_f, rank_g))
        ell = max(rank_f, rank_g)
    if not 0 < ell <= min(Uf.shape[1], Ug.shape[1]):
        raise DimensionError(f"ell={ell} exceeds kinetics snapshot dimensions {np.shape(S_f)}")
    Phi_f = np.ascontiguousarray(Uf[:, :ell])
    Phi_g = np.ascontiguousarray(Ug[:, :ell])
    idx_f = deim_points(Phi_f)
    idx_g = deim_points(Phi_g)
    PhiD_f, cond_f = _interpolation_basis(Phi_f, idx_f)
    PhiD_g, cond_g = _interpolation_basis(Phi_g, idx_g)
    log.info("DEIM ell=%d, cond(P_f^T Phi_f)=%.3e, cond(P_g^T Phi_g)=%.3e", ell, cond_f, cond_g)
    Psi_u, Psi_v = basis.Psi_u, basis.Psi_v
    return DeimOperator(
        Phi_f, Phi_g, idx_f, idx_g, PhiD_f, PhiD_g,
        Psi_u.T @ PhiD_f, Psi_v.T @ PhiD_g,
        Psi_u[idx_f, :].copy(), Psi_v[idx_f, :].copy(),
        Psi_u[idx_g, :].copy(), Psi_v[idx_g, :].copy(),
        rank_f, rank_g, cond_f, cond_g,
        time.perf_counter() - t0,
    )


def solve_pod_deim(rom: RomSpec, deim: DeimOperator, model: KineticsModel, n_steps: int, h_t: float,
                   u0r, v0r, *, t0=0.0, store_every=0, raise_on_blowup=False):
    """POD-DEIM reduced IMEX integration; kinetics are only evaluated at the ``ell`` points."""
    r = rom.r
    if r > deim.R:
        raise DimensionError(f"r={r} exceeds the DEIM operator's basis dimension {deim.R}")
    Fu = np.ascontiguousarray(deim.Pf_Psi_u[:, :r])
    Fv = np.ascontiguousarray(deim.Pf_Psi_v[:, :r])
    Gu = np.ascontiguousarray(deim.Pg_Psi_u[:, :r])
    Gv = np.ascontiguousarray(deim.Pg_Psi_v[:, :r])
    Ef = np.ascontiguousarray(deim.PsiT_PhiD_f[:r])
    Eg = np.ascontiguousarray(deim.PsiT_PhiD_g[:r])
    f, g = model.f, model.g

    def explicit(k, ur, vr):
        return Ef @ f(Fu @ ur, Fv @ vr), Eg @ g(Gu @ ur, Gv @ vr)

    Minv_u = imex_inverse(rom.A_r, model.d_u, h_t)
    Minv_v = imex_inverse(rom.B_r, model.d_v, h_t)
    return integrate_reduced(explicit, Minv_u, Minv_v, u0r, v0r, n_steps, h_t, t0=t0,
                             method="pod-deim", store_every=store_every,
                             raise_on_blowup=raise_on_blowup)
