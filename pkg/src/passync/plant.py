"""Heterogeneous second-order followers ``J x'' + B x' = u + delta``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonFiniteInput


def as_vector(values, m: int | None = None, name: str = "value") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if m is not None:
        if arr.size == 1 and m > 1:
            arr = np.full(m, arr[0])
        elif arr.size != m:
            raise ValueError(f"{name} has {arr.size} entries, expected {m}")
    return arr


def require_finite(*arrays, what: str = "input") -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput(f"non-finite {what}")


@dataclass(frozen=True)
class PlantParams:
    """Diagonal inertia ``J`` (positive) and damping ``B`` (any sign)."""

    J: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        J = as_vector(self.J, name="J")
        B = as_vector(self.B, J.size, name="B")
        require_finite(J, B, what="plant parameter")
        if np.any(J <= 0):
            raise ValueError("inertia J must be strictly positive")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "B", B)

    @property
    def m(self) -> int:
        return self.J.size


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = as_vector(self.x, name="x")
        v = as_vector(self.v, x.size, name="v")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, m: int) -> "PlantState":
        return cls(np.zeros(m), np.zeros(m))


def paper_params(m: int) -> PlantParams:
    """``J_i = 0.5 + 0.1 i`` and ``b_i = -1.3 - 0.1 i`` for ``i = 1..m`` (open-loop unstable)."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    i = np.arange(1, m + 1, dtype=float)
    return PlantParams(0.5 + 0.1 * i, -1.3 - 0.1 * i)


def plant_deriv(p: PlantParams, s: PlantState, u, delta) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x_dot, v_dot)``."""
    u = as_vector(u, p.m, name="u")
    delta = as_vector(delta, p.m, name="delta")
    require_finite(s.x, s.v, u, delta)
    if s.x.size != p.m:
        raise ValueError(f"state has {s.x.size} agents, parameters have {p.m}")
    return s.v.copy(), _kernels.plant_accel(p.J, p.B, s.v, u, delta)
