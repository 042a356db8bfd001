"""Full-order IMEX Euler integration, snapshot collection and dynamics indicators."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import SpatialDiscretization, unvec, vec
from .errors import DimensionError, DivergenceError, DomainError, NumericalError
from .kinetics import KineticsModel

__all__ = [
    "TimeGrid",
    "SnapshotSet",
    "DynamicsIndicators",
    "FullRun",
    "ImexVectorSolver",
    "ImexMatrixSolver",
    "sylvester_step",
    "step_imex_vector",
    "step_imex_matrix",
    "run_full",
    "spatial_mean",
    "increment_series",
    "find_tau",
    "compute_indicators",
]


@dataclass(frozen=True)
class TimeGrid:
    T: float
    h_t: float

    def __post_init__(self):
        if not self.h_t > 0:
            raise DomainError(f"h_t must be positive, got {self.h_t}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        n_t = round(self.T / self.h_t)
        if n_t < 1 or abs(n_t * self.h_t - self.T) > 1e-9 * self.T:
            raise DomainError(f"T={self.T} is not an integer multiple of h_t={self.h_t}")

    @property
    def n_t(self) -> int:
        return round(self.T / self.h_t)

    def t(self, k) -> float:
        return k * self.h_t

    def stored_steps(self, stride: int) -> np.ndarray:
        """Step indices kept when storing every ``stride``-th state plus the last."""
        steps = np.arange(0, self.n_t + 1, stride)
        if steps[-1] != self.n_t:
            steps = np.append(steps, self.n_t)
        return steps


@dataclass(eq=False)
class SnapshotSet:
    """Solution and kinetics snapshots, one column per stored instant."""

    S_u: np.ndarray
    S_v: np.ndarray
    S_f: np.ndarray
    S_g: np.ndarray
    times: np.ndarray
    stride: int
    h_t: float
    steps: np.ndarray | None = None

    def __post_init__(self):
        m = self.times.shape[0]
        for name in ("S_u", "S_v", "S_f", "S_g"):
            if getattr(self, name).shape[1] != m:
                raise DimensionError(f"{name} has {getattr(self, name).shape[1]} columns, expected {m}")
        if m > 1 and np.any(np.diff(self.times) <= 0):
            raise DimensionError("snapshot times must be strictly increasing")
        if self.steps is None:
            self.steps = np.rint(self.times / self.h_t).astype(np.int64)

    @classmethod
    def from_states(cls, model, S_u, S_v, times, stride, h_t, steps=None):
        return cls(S_u, S_v, model.f(S_u, S_v), model.g(S_u, S_v), np.asarray(times, float), stride, h_t, steps)

    @property
    def n(self) -> int:
        return self.S_u.shape[0]

    @property
    def m(self) -> int:
        return self.S_u.shape[1]

    def columns(self, start: int, stop: int) -> "SnapshotSet":
        """Columns ``start .. stop - 1`` as a new set (views, not copies)."""
        sl = slice(start, stop)
        return SnapshotSet(
            self.S_u[:, sl], self.S_v[:, sl], self.S_f[:, sl], self.S_g[:, sl],
            self.times[sl], self.stride, self.h_t, self.steps[sl],
        )


@dataclass
class DynamicsIndicators:
    times: np.ndarray
    mean_u: np.ndarray
    mean_v: np.ndarray
    delta: np.ndarray
    tau: float
    tau_index: int

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "tau_index": self.tau_index,
            "times": self.times.tolist(),
            "mean_u": self.mean_u.tolist(),
            "mean_v": self.mean_v.tolist(),
            "delta": self.delta.tolist(),
        }


@dataclass(eq=False)
class FullRun:
    u: np.ndarray
    v: np.ndarray
    snapshots: SnapshotSet
    wall_time: float
    method: str


class ImexVectorSolver:
    """IMEX Euler on the vectorized system with sparse LU factors prepared once."""

    def __init__(self, disc: SpatialDiscretization, model: KineticsModel, h_t: float):
        self.model = model
        self.h_t = float(h_t)
        n = disc.grid.n
        eye = sp.identity(n, format="csc")
        A = disc.A.tocsc()
        try:
            self._lu_u = spla.splu(eye - self.h_t * model.d_u * A)
            self._lu_v = spla.splu(eye - self.h_t * model.d_v * A)
        except RuntimeError as exc:
            raise NumericalError(f"sparse factorization failed: {exc}") from exc

    def step(self, u: np.ndarray, v: np.ndarray):
        h = self.h_t
        rhs_u = u + h * self.model.f(u, v)
        rhs_v = v + h * self.model.g(u, v)
        return self._lu_u.solve(rhs_u), self._lu_v.solve(rhs_v)


def _sylvester_denominator(disc, d, h_t):
    return 1.0 - h_t * d * disc.laplacian_eigenvalues()


def sylvester_step(C: np.ndarray, disc: SpatialDiscretization, d: float, h_t: float) -> np.ndarray:
    """Solve ``Z - h_t d (T1 Z / h_x^2 + Z T2^T / h_y^2) = C`` in the eigenbases of T1, T2."""
    V1, V1i = disc.spec1.V, disc.spec1.V_inv
    V2, V2i = disc.spec2.V, disc.spec2.V_inv
    Y = (V1i @ C @ V2i.T) / _sylvester_denominator(disc, d, h_t)
    return V1 @ Y @ V2.T


class ImexMatrixSolver:
    """IMEX Euler in matrix form; each step is two Sylvester solves in spectral space."""

    def __init__(self, disc: SpatialDiscretization, model: KineticsModel, h_t: float):
        self.model = model
        self.h_t = float(h_t)
        self._V1, self._V1i = disc.spec1.V, disc.spec1.V_inv
        self._V2T, self._V2iT = disc.spec2.V.T.copy(), disc.spec2.V_inv.T.copy()
        self._inv_den_u = 1.0 / _sylvester_denominator(disc, model.d_u, self.h_t)
        self._inv_den_v = 1.0 / _sylvester_denominator(disc, model.d_v, self.h_t)

    def step(self, Z: np.ndarray, W: np.ndarray):
        h = self.h_t
        C = Z + h * self.model.f(Z, W)
        D = W + h * self.model.g(Z, W)
        Z1 = self._V1 @ (((self._V1i @ C @ self._V2iT)) * self._inv_den_u) @ self._V2T
        W1 = self._V1 @ (((self._V1i @ D @ self._V2iT)) * self._inv_den_v) @ self._V2T
        return Z1, W1


def step_imex_vector(u, v, disc, model, h_t):
    """One vector-form IMEX step (builds the factorizations; use the class in loops)."""
    if h_t == 0:
        return np.array(u, dtype=float), np.array(v, dtype=float)
    return ImexVectorSolver(disc, model, h_t).step(np.asarray(u, float), np.asarray(v, float))


def step_imex_matrix(Z, W, disc, model, h_t):
    """One matrix-form IMEX step on ``(n_x, n_y)`` fields."""
    if h_t == 0:
        return np.array(Z, dtype=float), np.array(W, dtype=float)
    return ImexMatrixSolver(disc, model, h_t).step(np.asarray(Z, float), np.asarray(W, float))


def run_full(model, disc, timegrid: TimeGrid, u0, v0, stride: int = 4, method: str = "matrix",
             progress=None) -> FullRun:
    """Integrate the full model over ``timegrid`` and collect snapshots.

    Every ``stride``-th state is stored, starting with the initial one, and
    the final state is always stored.  ``wall_time`` covers the time loop
    only.  ``progress``, if given, is called with the step index after each
    stored column.
    """
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    grid = disc.grid
    n, h = grid.n, timegrid.h_t
    steps = timegrid.stored_steps(stride)
    buf_u = np.empty((steps.size, n))
    buf_v = np.empty((steps.size, n))
    buf_u[0] = u0
    buf_v[0] = v0
    col = 1
    if method == "matrix":
        solver = ImexMatrixSolver(disc, model, h)
        state = (unvec(np.array(u0, float), grid).copy(order="C"), unvec(np.array(v0, float), grid).copy(order="C"))
        flat = vec
    elif method == "vector":
        solver = ImexVectorSolver(disc, model, h)
        state = (np.array(u0, float), np.array(v0, float))
        flat = np.ravel
    else:
        raise DomainError(f"unknown full-solver method {method!r}")

    next_store = steps[1] if steps.size > 1 else -1
    t0 = time.perf_counter()
    for k in range(1, timegrid.n_t + 1):
        state = solver.step(*state)
        if not math.isfinite(state[0].sum() + state[1].sum()):
            raise DivergenceError(k, f"full model, {method} form")
        if k == next_store:
            buf_u[col] = flat(state[0])
            buf_v[col] = flat(state[1])
            col += 1
            next_store = steps[col] if col < steps.size else -1
            if progress is not None:
                progress(k)
    wall = time.perf_counter() - t0

    S_u, S_v = buf_u.T, buf_v.T
    snaps = SnapshotSet.from_states(model, S_u, S_v, steps * h, stride, h, steps)
    return FullRun(S_u[:, -1].copy(), S_v[:, -1].copy(), snaps, wall, method)


def spatial_mean(field) -> float:
    return float(np.mean(field))


def increment_series(S: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Frobenius norms of differences between consecutive columns."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[1] < 2:
        raise DimensionError("increment needs at least two snapshot columns")
    m = S.shape[1]
    out = np.empty(m - 1)
    for start in range(0, m - 1, chunk):
        stop = min(start + chunk, m - 1)
        out[start:stop] = np.linalg.norm(S[:, start + 1 : stop + 1] - S[:, start:stop], axis=0)
    return out


def find_tau(delta, times, t_min: float = 0.0):
    """Time and index of the first maximum of ``delta``.

    ``delta[k]`` belongs to ``times[k]``.  With ``t_min > 0`` only increments
    starting at or after ``t_min`` compete; this skips an initial relaxation
    of the random perturbation that can dwarf the pattern-growth peak.
    """
    delta = np.asarray(delta)
    if delta.size == 0:
        raise DimensionError("empty increment series")
    times = np.asarray(times)
    first = int(np.searchsorted(times[: delta.size], t_min, side="left")) if t_min > 0 else 0
    if first >= delta.size:
        raise DomainError(f"t_min={t_min} leaves no increments to search")
    idx = first + int(np.argmax(delta[first:]))
    return float(times[idx]), idx


def compute_indicators(snapshots: SnapshotSet, t_min: float = 0.0) -> DynamicsIndicators:
    delta = increment_series(snapshots.S_u)
    tau, idx = find_tau(delta, snapshots.times, t_min)
    return DynamicsIndicators(
        snapshots.times.copy(),
        snapshots.S_u.mean(axis=0),
        snapshots.S_v.mean(axis=0),
        delta,
        tau,
        idx,
    )
