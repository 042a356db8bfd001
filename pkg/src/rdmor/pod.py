"""POD bases, Galerkin-projected operators and the POD reduced integrator."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretization import SpatialDiscretization
from .errors import DimensionError, DivergenceError, NumericalError
from .kinetics import KineticsModel

__all__ = [
    "PodBasis",
    "RomSpec",
    "RomTrajectory",
    "GalerkinOperators",
    "pod_basis",
    "left_singular_vectors",
    "numerical_rank",
    "rank_from_singular_values",
    "project_operators",
    "solve_pod",
    "reconstruct",
    "imex_inverse",
    "integrate_reduced",
]

# a reduced state whose norm exceeds this multiple of the initial scale is
# treated as blown up
BLOWUP_FACTOR = 1e6


def _fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    if U.shape[1] == 0:
        return U
    rows = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[rows, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def rank_from_singular_values(sigma, shape) -> int:
    sigma = np.asarray(sigma)
    if sigma.size == 0 or sigma[0] == 0:
        return 0
    tol = max(shape) * np.finfo(float).eps * sigma[0]
    return int(np.count_nonzero(sigma > tol))


def numerical_rank(S) -> int:
    """Number of singular values above ``max(rows, cols) * eps * sigma_max``."""
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return 0
    sigma = sla.svd(S, compute_uv=False, check_finite=False)
    return rank_from_singular_values(sigma, S.shape)


# sketched SVD settings: matrices with both sides at least SKETCH_MIN_DIM try
# a seeded randomized range finder before the dense SVD
SKETCH_MIN_DIM = 512
_SKETCH_START = 128
_SKETCH_HEADROOM = 32
_SKETCH_SEED = 20240101


def _dense_svd(S):
    try:
        U, sigma, _ = sla.svd(S, full_matrices=False, check_finite=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        U, sigma, _ = sla.svd(S, full_matrices=False, check_finite=False, lapack_driver="gesvd")
    return U, sigma


def _sketched_svd(S, need):
    """Truncated SVD from a Gaussian sketch, or ``None`` if no sketch size qualifies.

    A sketch of ``p`` columns is accepted when the residual
    ``||S - Q Q^T S||_F`` is below the numerical-rank tolerance, so every
    retained singular value is within that tolerance of the dense one, and
    the rank leaves ``_SKETCH_HEADROOM`` columns to spare.  The sketch size
    sequence does not depend on ``need`` unless ``need`` exceeds it, so bases
    of different requested dimension stay nested bit for bit.
    """
    m, n = S.shape
    rng = np.random.Generator(np.random.PCG64(_SKETCH_SEED))
    p = _SKETCH_START
    while 2 * p <= min(m, n):
        Omega = rng.standard_normal((n, p))
        Q, _ = sla.qr(S @ Omega, mode="economic", check_finite=False)
        B = Q.T @ S
        Ub, sigma, _ = sla.svd(B, full_matrices=False, check_finite=False)
        tol = max(m, n) * np.finfo(float).eps * sigma[0]
        rank = int(np.count_nonzero(sigma > tol))
        if rank + _SKETCH_HEADROOM <= p and need <= p and np.linalg.norm(S - Q @ B) <= tol:
            return Q @ Ub, sigma
        p *= 2
    return None


def _thin_svd(S, need=0):
    """Left singular vectors and singular values of ``S``.

    Large matrices of low numerical rank use a verified sketch that returns
    only the leading columns; everything else goes to the dense SVD.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise DimensionError("snapshot matrix must be 2D")
    if min(S.shape) >= SKETCH_MIN_DIM and np.isfinite(S).all():
        out = _sketched_svd(S, need)
        if out is not None:
            return out
    return _dense_svd(S)


def left_singular_vectors(S, need=0):
    """All computed left singular vectors (sign-normalized) and singular values.

    For sketched matrices these are the leading ones only, at least ``need``
    of them and always more than the numerical rank.
    """
    U, sigma = _thin_svd(S, need)
    return _fix_signs(np.ascontiguousarray(U)), sigma


def pod_basis(S, R=None):
    """Leading ``R`` left singular vectors of ``S`` and the computed singular values.

    ``R=None`` keeps as many vectors as the numerical rank.  Columns are
    sign-normalized (largest-magnitude entry positive).
    """
    S = np.asarray(S, dtype=float)
    if S.ndim == 2 and R is not None and not 0 <= R <= min(S.shape):
        raise DimensionError(f"rank {R} exceeds matrix dimensions {S.shape}")
    U, sigma = _thin_svd(S, 0 if R is None else R)
    if R is None:
        R = rank_from_singular_values(sigma, S.shape)
    return _fix_signs(np.ascontiguousarray(U[:, :R])), sigma


@dataclass(eq=False)
class PodBasis:
    """Separate POD subspaces for ``u`` and ``v``.

    ``rank_u``/``rank_v`` are numerical ranks of the snapshot matrices and
    ``rho_sol`` their maximum.  Bases of smaller dimension are the leading
    columns (see :meth:`truncate`).
    """

    Psi_u: np.ndarray
    Psi_v: np.ndarray
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    rank_u: int
    rank_v: int
    svd_time: float = 0.0

    @property
    def rho_sol(self) -> int:
        return max(self.rank_u, self.rank_v)

    @property
    def R(self) -> int:
        return self.Psi_u.shape[1]

    @property
    def n(self) -> int:
        return self.Psi_u.shape[0]

    @classmethod
    def from_snapshots(cls, S_u, S_v, R=None) -> "PodBasis":
        """Bases of dimension ``R`` (default: ``rho_sol``) from two snapshot matrices."""
        t0 = time.perf_counter()
        need = 0 if R is None else R
        U_u, sigma_u = _thin_svd(S_u, need)
        U_v, sigma_v = _thin_svd(S_v, need)
        rank_u = rank_from_singular_values(sigma_u, S_u.shape)
        rank_v = rank_from_singular_values(sigma_v, S_v.shape)
        R = max(rank_u, rank_v) if R is None else R
        if not 0 < R <= min(U_u.shape[1], U_v.shape[1]):
            raise DimensionError(f"R={R} exceeds snapshot dimensions {S_u.shape}")
        Psi_u = _fix_signs(U_u[:, :R])
        Psi_v = _fix_signs(U_v[:, :R])
        return cls(
            np.ascontiguousarray(Psi_u[:, :R]),
            np.ascontiguousarray(Psi_v[:, :R]),
            sigma_u,
            sigma_v,
            rank_u,
            rank_v,
            time.perf_counter() - t0,
        )

    def truncate(self, r: int) -> "PodBasis":
        if not 0 < r <= self.R:
            raise DimensionError(f"cannot truncate a rank-{self.R} basis to {r}")
        return PodBasis(self.Psi_u[:, :r], self.Psi_v[:, :r], self.sigma_u, self.sigma_v,
                        self.rank_u, self.rank_v, self.svd_time)


@dataclass(eq=False)
class RomSpec:
    """Reduced operators of dimension ``r``."""

    r: int
    Psi_u: np.ndarray
    Psi_v: np.ndarray
    A_r: np.ndarray
    B_r: np.ndarray

    def reduce(self, u, v):
        """Galerkin projection of full-space fields onto the reduced spaces."""
        return self.Psi_u.T @ u, self.Psi_v.T @ v


class GalerkinOperators:
    """``Psi^T A Psi`` at the full basis dimension; smaller ROMs slice it.

    Slicing (rather than recomputing) makes the rank-``r`` operators exactly
    the leading blocks of the rank-``R`` ones, and the first ``r`` rows are
    the ``r x R`` cross operators used by the correction.
    """

    def __init__(self, disc: SpatialDiscretization, basis: PodBasis):
        self.basis = basis
        self.AR_u = basis.Psi_u.T @ (disc.A @ basis.Psi_u)
        self.AR_v = basis.Psi_v.T @ (disc.A @ basis.Psi_v)

    @property
    def R(self) -> int:
        return self.basis.R

    def rom(self, r: int) -> RomSpec:
        if not 0 < r <= self.R:
            raise DimensionError(f"reduced dimension r={r} outside 1..{self.R}")
        return RomSpec(
            r,
            self.basis.Psi_u[:, :r],
            self.basis.Psi_v[:, :r],
            self.AR_u[:r, :r].copy(),
            self.AR_v[:r, :r].copy(),
        )


def project_operators(disc: SpatialDiscretization, Psi_u, Psi_v, r: int) -> RomSpec:
    """Dense ``A_r = Psi_u^T A Psi_u`` and ``B_r = Psi_v^T A Psi_v`` from the first ``r`` columns."""
    R = min(Psi_u.shape[1], Psi_v.shape[1])
    if not 0 < r <= R:
        raise DimensionError(f"reduced dimension r={r} outside 1..{R}")
    Pu, Pv = Psi_u[:, :r], Psi_v[:, :r]
    return RomSpec(r, Pu, Pv, Pu.T @ (disc.A @ Pu), Pv.T @ (disc.A @ Pv))


def reconstruct(Psi, tilde) -> np.ndarray:
    return Psi @ tilde


@dataclass(eq=False)
class RomTrajectory:
    """History of a reduced solve.

    ``u``/``v`` hold the reduced states at ``times`` (one row per stored
    instant, always including the first and last).  A blown-up run has
    ``stable=False``, ``failed_step`` set and no final state.
    """

    method: str
    r: int
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    wall_time: float
    stable: bool = True
    failed_step: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final_u(self) -> np.ndarray:
        return self.u[-1]

    @property
    def final_v(self) -> np.ndarray:
        return self.v[-1]

    def lift(self, Psi_u, Psi_v, index=-1):
        return Psi_u[:, : self.r] @ self.u[index], Psi_v[:, : self.r] @ self.v[index]


def imex_inverse(M_r: np.ndarray, d: float, h_t: float) -> np.ndarray:
    """Explicit inverse of ``I - h_t d M_r`` from a dense LU factorization.

    The matrix is a small, well-conditioned perturbation of the identity,
    so applying the inverse is as accurate as two triangular solves and far
    cheaper per step from Python.
    """
    r = M_r.shape[0]
    lu = sla.lu_factor(np.eye(r) - h_t * d * M_r, check_finite=False)
    if np.any(np.diag(lu[0]) == 0):
        raise NumericalError("singular reduced IMEX matrix")
    return sla.lu_solve(lu, np.eye(r), check_finite=False)


def integrate_reduced(explicit, Minv_u, Minv_v, u0, v0, n_steps, h_t, *, t0=0.0, method="",
                      store_every=0, raise_on_blowup=False):
    """Common IMEX loop ``u_{k+1} = Minv_u (u_k + h_t E_u(k, u_k, v_k))``.

    ``explicit(k, u, v)`` returns the explicit right-hand sides for step
    ``k`` (0-based, local to this integration).  ``store_every=0`` keeps only
    the first and last state; ``store_every=s`` also keeps every ``s``-th.
    """
    u = np.array(u0, dtype=float)
    v = np.array(v0, dtype=float)
    r = u.shape[0]
    scale = max(1.0, float(np.linalg.norm(u)), float(np.linalg.norm(v)))
    bound2 = (BLOWUP_FACTOR * scale) ** 2
    keep = [0]
    hist_u = [u.copy()]
    hist_v = [v.copy()]
    failed = None
    t_start = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            eu, ev = explicit(k, u, v)
            u = Minv_u @ (u + h_t * eu)
            v = Minv_v @ (v + h_t * ev)
            size = u @ u + v @ v
            if not (size <= bound2):  # catches NaN too
                failed = k + 1
                break
            if store_every and (k + 1) % store_every == 0 and k + 1 != n_steps:
                keep.append(k + 1)
                hist_u.append(u)
                hist_v.append(v)
    wall = time.perf_counter() - t_start
    if failed is not None:
        if raise_on_blowup:
            raise DivergenceError(failed, f"{method}, r={r}")
        return RomTrajectory(method, r, t0 + h_t * np.asarray(keep, float), np.array(hist_u),
                             np.array(hist_v), wall, stable=False, failed_step=failed)
    if keep[-1] != n_steps:
        keep.append(n_steps)
        hist_u.append(u)
        hist_v.append(v)
    return RomTrajectory(method, r, t0 + h_t * np.asarray(keep, float), np.array(hist_u),
                         np.array(hist_v), wall)


def solve_pod(rom: RomSpec, model: KineticsModel, n_steps: int, h_t: float, u0r, v0r, *,
              t0=0.0, store_every=0, raise_on_blowup=False) -> RomTrajectory:
    """Integrate the POD-Galerkin system with IMEX Euler in vector form.

    The kinetics are evaluated on the full-dimensional lifts and projected
    back, so each step costs O(n r).
    """
    Pu = np.ascontiguousarray(rom.Psi_u)
    Pv = np.ascontiguousarray(rom.Psi_v)
    PuT, PvT = Pu.T.copy(), Pv.T.copy()
    f, g = model.f, model.g

    def explicit(k, ur, vr):
        U = Pu @ ur
        V = Pv @ vr
        return PuT @ f(U, V), PvT @ g(U, V)

    Minv_u = imex_inverse(rom.A_r, model.d_u, h_t)
    Minv_v = imex_inverse(rom.B_r, model.d_v, h_t)
    return integrate_reduced(explicit, Minv_u, Minv_v, u0r, v0r, n_steps, h_t, t0=t0, method="pod",
                             store_every=store_every, raise_on_blowup=raise_on_blowup)
