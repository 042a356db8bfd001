"""Reaction kinetics of the three Turing models.

All kinetics are evaluated component-wise; ``u`` and ``v`` may be scalars or
arrays of equal shape.  Expressions are written in the literal order of the
model equations so that array and scalar evaluation agree bit for bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DimensionError, DomainError

__all__ = [
    "ModelName",
    "KineticsModel",
    "Equilibrium",
    "eval_f",
    "eval_g",
    "equilibrium",
    "dib_constrained_D",
    "fhn",
    "schnakenberg",
    "dib",
    "build_model",
]


class ModelName(str, Enum):
    FHN = "fhn"
    SCHNAKENBERG = "schnakenberg"
    DIB = "dib"


PARAMETER_NAMES = {
    ModelName.FHN: ("alpha", "beta", "gamma"),
    ModelName.SCHNAKENBERG: ("a", "b", "gamma"),
    ModelName.DIB: ("A1", "A2", "alpha", "B", "C", "D", "gamma", "k2", "k3", "rho"),
}

# tolerance used when checking an explicit DIB ``D`` against the constraint
_D_CONSTRAINT_RTOL = 1e-10


@dataclass(frozen=True)
class Equilibrium:
    u_e: float
    v_e: float


@dataclass(frozen=True)
class KineticsModel:
    """Reaction pair (f, g) with its parameters and diffusion coefficients.

    Use :func:`fhn`, :func:`schnakenberg`, :func:`dib` or
    :func:`build_model` rather than the raw constructor.
    """

    name: ModelName
    params: Mapping[str, float]
    d_u: float
    d_v: float
    D_derived: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "name", ModelName(self.name))
        expected = PARAMETER_NAMES[self.name]
        missing = [k for k in expected if k not in self.params]
        extra = [k for k in self.params if k not in expected]
        if missing or extra:
            raise DomainError(
                f"{self.name.value} parameters: missing {missing}, unexpected {extra}"
            )
        params = {k: float(self.params[k]) for k in expected}
        for k, val in params.items():
            if not math.isfinite(val):
                raise DomainError(f"parameter {k} is not finite")
        for k, val in (("d_u", self.d_u), ("d_v", self.d_v)):
            if not (math.isfinite(val) and val > 0):
                raise DomainError(f"{k} must be finite and > 0, got {val}")
        object.__setattr__(self, "params", MappingProxyType(params))
        object.__setattr__(self, "d_u", float(self.d_u))
        object.__setattr__(self, "d_v", float(self.d_v))

    def __hash__(self):
        return hash((self.name, tuple(self.params.items()), self.d_u, self.d_v))

    @property
    def scale(self) -> float:
        """Kinetic scale parameter (gamma, or rho for DIB)."""
        key = "rho" if self.name is ModelName.DIB else "gamma"
        return self.params[key]

    def f(self, u, v):
        p = self.params
        if self.name is ModelName.FHN:
            return p["gamma"] * (-u * (u * u - 1.0) - v)
        if self.name is ModelName.SCHNAKENBERG:
            return p["gamma"] * (p["a"] - u + u * u * v)
        return p["rho"] * (
            p["A1"] * (1.0 - v) * u - p["A2"] * (u * u * u) - p["B"] * (v - p["alpha"])
        )

    def g(self, u, v):
        p = self.params
        if self.name is ModelName.FHN:
            return p["gamma"] * (p["beta"] * (u - p["alpha"] * v))
        if self.name is ModelName.SCHNAKENBERG:
            return p["gamma"] * (p["b"] - u * u * v)
        gam = p["gamma"]
        return p["rho"] * (
            p["C"] * (1.0 + p["k2"] * u) * (1.0 - v) * (1.0 - gam * (1.0 - v))
            - p["D"] * v * (1.0 + p["k3"] * u) * (1.0 + gam * v)
        )

    def equilibrium(self) -> Equilibrium:
        p = self.params
        if self.name is ModelName.FHN:
            return Equilibrium(0.0, 0.0)
        if self.name is ModelName.SCHNAKENBERG:
            s = p["a"] + p["b"]
            return Equilibrium(s, p["b"] / (s * s))
        return Equilibrium(0.0, p["alpha"])

    def to_dict(self) -> dict:
        return {
            "name": self.name.value,
            "d_u": self.d_u,
            "d_v": self.d_v,
            "params": dict(self.params),
            "D_derived": self.D_derived,
        }


def _check_pair(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionError(f"u has shape {u.shape} but v has shape {v.shape}")
    return u, v


def eval_f(model: KineticsModel, u, v) -> np.ndarray:
    """Evaluate the u-kinetics entry by entry."""
    u, v = _check_pair(u, v)
    return model.f(u, v)


def eval_g(model: KineticsModel, u, v) -> np.ndarray:
    """Evaluate the v-kinetics entry by entry."""
    u, v = _check_pair(u, v)
    return model.g(u, v)


def equilibrium(model: KineticsModel) -> Equilibrium:
    return model.equilibrium()


def dib_constrained_D(C: float, alpha: float, gamma: float) -> float:
    """Value of ``D`` that makes ``(0, alpha)`` a homogeneous equilibrium of DIB."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    denom = alpha * (1.0 + gamma * alpha)
    if denom == 0.0:
        raise DomainError("alpha * (1 + gamma * alpha) vanishes")
    return C * (1.0 - alpha) * (1.0 - gamma + gamma * alpha) / denom


def fhn(alpha=0.1, beta=11.0, gamma=65.731, d_u=1.0, d_v=42.1887) -> KineticsModel:
    return KineticsModel(
        ModelName.FHN, {"alpha": alpha, "beta": beta, "gamma": gamma}, d_u, d_v
    )


def schnakenberg(a=0.1, b=0.9, gamma=1000.0, d_u=1.0, d_v=10.0) -> KineticsModel:
    return KineticsModel(
        ModelName.SCHNAKENBERG, {"a": a, "b": b, "gamma": gamma}, d_u, d_v
    )


def dib(
    A1=10.0,
    A2=1.0,
    alpha=0.5,
    B=66.0,
    C=3.0,
    gamma=0.2,
    k2=2.5,
    k3=1.5,
    rho=25.0 / 4.0,
    d_u=1.0,
    d_v=20.0,
    D=None,
) -> KineticsModel:
    """DIB morpho-chemical model.

    When ``D`` is omitted it is derived from the equilibrium constraint; an
    explicit ``D`` that violates the constraint triggers a warning.
    """
    derived = D is None
    D_star = dib_constrained_D(C, alpha, gamma)
    if derived:
        D = D_star
    elif abs(D - D_star) > _D_CONSTRAINT_RTOL * max(abs(D_star), 1.0):
        warnings.warn(
            f"explicit D={D} differs from the constrained value {D_star}; "
            "(0, alpha) is no longer an equilibrium",
            stacklevel=2,
        )
    params = dict(A1=A1, A2=A2, alpha=alpha, B=B, C=C, D=D, gamma=gamma, k2=k2, k3=k3, rho=rho)
    return KineticsModel(ModelName.DIB, params, d_u, d_v, D_derived=derived)


_FACTORIES = {ModelName.FHN: fhn, ModelName.SCHNAKENBERG: schnakenberg, ModelName.DIB: dib}


def build_model(name, d_u=None, d_v=None, **params) -> KineticsModel:
    """Build a model by name, filling unspecified values with the defaults."""
    name = ModelName(name)
    kwargs = dict(params)
    if d_u is not None:
        kwargs["d_u"] = d_u
    if d_v is not None:
        kwargs["d_v"] = d_v
    allowed = set(PARAMETER_NAMES[name]) | {"d_u", "d_v"}
    unknown = set(kwargs) - allowed
    if unknown:
        raise DomainError(f"unknown parameters for {name.value}: {sorted(unknown)}")
    return _FACTORIES[name](**kwargs)
