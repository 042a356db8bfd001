"""Finite-difference discretization on a rectangle with zero Neumann flux.

Fields are stored either as vectors of length ``n = n_x * n_y`` or as
``(n_x, n_y)`` matrices; the two are related by column-major ``vec``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DomainError, NumericalError
from .kinetics import KineticsModel

__all__ = [
    "Grid",
    "SpectralFactorization",
    "SpatialDiscretization",
    "build_second_difference",
    "build_laplacian",
    "spectral_factorize",
    "discretize",
    "initial_condition",
    "vec",
    "unvec",
]


@dataclass(frozen=True)
class Grid:
    L_x: float
    L_y: float
    n_x: int
    n_y: int

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 2:
            raise DimensionError(f"need at least 2 interior points per axis, got {self.n_x}x{self.n_y}")
        if not (self.L_x > 0 and self.L_y > 0):
            raise DomainError("domain lengths must be positive")

    @property
    def h_x(self) -> float:
        return self.L_x / (self.n_x + 1)

    @property
    def h_y(self) -> float:
        return self.L_y / (self.n_y + 1)

    @property
    def n(self) -> int:
        return self.n_x * self.n_y

    @property
    def area(self) -> float:
        return self.L_x * self.L_y

    def coordinates(self):
        """Interior node coordinates ``(x, y)`` as 1D arrays."""
        x = self.h_x * np.arange(1, self.n_x + 1)
        y = self.h_y * np.arange(1, self.n_y + 1)
        return x, y


class SpectralFactorization(NamedTuple):
    eigenvalues: np.ndarray
    V: np.ndarray
    V_inv: np.ndarray


def vec(Z: np.ndarray) -> np.ndarray:
    return np.asarray(Z).reshape(-1, order="F")


def unvec(u: np.ndarray, grid: Grid) -> np.ndarray:
    return np.asarray(u).reshape((grid.n_x, grid.n_y), order="F")


def build_second_difference(m: int) -> np.ndarray:
    """Second-difference matrix with ghost-node reflection at both ends.

    Interior rows are ``(1, -2, 1)``; the first and last rows are ``(-2, 2)``
    and ``(2, -2)``, so constants lie in the null space.
    """
    if m < 2:
        raise DimensionError(f"second-difference operator needs m >= 2, got {m}")
    T = np.zeros((m, m))
    idx = np.arange(m)
    T[idx, idx] = -2.0
    T[idx[:-1], idx[:-1] + 1] = 1.0
    T[idx[1:], idx[1:] - 1] = 1.0
    T[0, 1] = 2.0
    T[-1, -2] = 2.0
    return T


def _tridiagonal_symmetrizer(T):
    """Diagonal ``d`` with ``diag(d) T diag(1/d)`` symmetric, or None."""
    m = T.shape[0]
    if np.any(np.triu(T, 2)) or np.any(np.tril(T, -2)):
        return None
    upper = np.diag(T, 1)
    lower = np.diag(T, -1)
    if np.any(upper * lower <= 0):
        return None
    d = np.ones(m)
    for i in range(m - 1):
        d[i + 1] = d[i] * np.sqrt(upper[i] / lower[i])
    return d / d.max()


def spectral_factorize(T: np.ndarray) -> SpectralFactorization:
    """Real eigendecomposition ``T = V diag(lam) V_inv``.

    Symmetric input goes straight to ``eigh``.  A tridiagonal matrix with
    positive off-diagonal products (the Neumann stencil) is first made
    symmetric by a diagonal similarity, so ``V`` stays well conditioned.
    Anything else falls back to the general solver and must have a real
    spectrum.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {T.shape}")
    try:
        if np.array_equal(T, T.T):
            lam, Q = np.linalg.eigh(T)
            return SpectralFactorization(lam, Q, Q.T.copy())
        d = _tridiagonal_symmetrizer(T)
        if d is not None:
            S = (d[:, None] * T) / d[None, :]
            lam, Q = np.linalg.eigh(0.5 * (S + S.T))
            return SpectralFactorization(lam, Q / d[:, None], Q.T * d[None, :])
        lam, V = np.linalg.eig(T)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-solver failed: {exc}") from exc
    if np.max(np.abs(lam.imag)) > 1e-10 * max(1.0, np.max(np.abs(lam))):
        raise NumericalError("matrix has a complex spectrum")
    lam = lam.real
    V = V.real
    order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    return SpectralFactorization(lam, V, np.linalg.inv(V))


def build_laplacian(T1, T2, h_x: float, h_y: float) -> sp.csr_matrix:
    """``A = (I_ny (x) T1) / h_x^2 + (T2 (x) I_nx) / h_y^2`` in CSR form."""
    n_x, n_y = T1.shape[0], T2.shape[0]
    A = sp.kron(sp.identity(n_y), sp.csr_matrix(T1)) / h_x**2
    A = A + sp.kron(sp.csr_matrix(T2), sp.identity(n_x)) / h_y**2
    return A.tocsr()


@dataclass(frozen=True, eq=False)
class SpatialDiscretization:
    grid: Grid
    T1: np.ndarray
    T2: np.ndarray
    A: sp.csr_matrix
    spec1: SpectralFactorization
    spec2: SpectralFactorization

    def apply_laplacian(self, Z: np.ndarray) -> np.ndarray:
        """Matrix-form Laplacian, equal to ``unvec(A @ vec(Z))``."""
        return self.T1 @ Z / self.grid.h_x**2 + Z @ self.T2.T / self.grid.h_y**2

    def laplacian_eigenvalues(self) -> np.ndarray:
        """``(n_x, n_y)`` array of ``lam1_i / h_x^2 + lam2_j / h_y^2``."""
        g = self.grid
        return self.spec1.eigenvalues[:, None] / g.h_x**2 + self.spec2.eigenvalues[None, :] / g.h_y**2


@functools.lru_cache(maxsize=16)
def discretize(grid: Grid) -> SpatialDiscretization:
    """Build (and cache) all operators for ``grid``."""
    T1 = build_second_difference(grid.n_x)
    T2 = build_second_difference(grid.n_y)
    A = build_laplacian(T1, T2, grid.h_x, grid.h_y)
    spec1 = spectral_factorize(T1)
    spec2 = spec1 if grid.n_y == grid.n_x else spectral_factorize(T2)
    for arr in (T1, T2):
        arr.setflags(write=False)
    return SpatialDiscretization(grid, T1, T2, A, spec1, spec2)


def initial_condition(model: KineticsModel, grid: Grid, amplitude: float, seed: int):
    """Equilibrium plus a uniform ``[0, 1)`` perturbation scaled by ``amplitude``.

    Draws come from numpy's PCG64 generator seeded with ``seed``: first the
    ``n`` values for ``u``, then ``n`` values for ``v``.
    """
    if amplitude < 0:
        raise DomainError("amplitude must be nonnegative")
    eq = model.equilibrium()
    rng = np.random.Generator(np.random.PCG64(seed))
    xi = rng.random(grid.n)
    eta = rng.random(grid.n)
    return eq.u_e + amplitude * xi, eq.v_e + amplitude * eta
