"""Leader trajectory and disturbance profiles as analytic functions of time.

Every signal is a constant plus a finite sum of ``a sin(w t) + b cos(w t)``
terms, which gives exact derivatives and a compact array form that the
integration kernel evaluates directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

LEADER_KINDS = ("paper", "constant", "zero", "custom")
DISTURBANCE_KINDS = ("none", "d1", "d2", "d3", "custom")


@dataclass(frozen=True)
class SinusoidSum:
    """``offset + sum_k sin_amp[k] sin(freq[k] t) + cos_amp[k] cos(freq[k] t)``."""

    offset: float = 0.0
    sin_amp: tuple[float, ...] = ()
    cos_amp: tuple[float, ...] = ()
    freq: tuple[float, ...] = ()

    def __post_init__(self):
        n = len(self.freq)
        if len(self.sin_amp) != n or len(self.cos_amp) != n:
            raise ValueError("sin_amp, cos_amp and freq must have equal length")
        for name in ("sin_amp", "cos_amp", "freq"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not all(np.isfinite(vals)):
                raise ValueError(f"non-finite entry in {name}")
            object.__setattr__(self, name, vals)
        if not np.isfinite(self.offset):
            raise ValueError("non-finite offset")
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_terms(cls, offset=0.0, terms: Sequence[Sequence[float]] = ()) -> "SinusoidSum":
        """Build from ``[(a, b, w), ...]`` triples."""
        terms = [tuple(map(float, t)) for t in terms]
        return cls(offset, tuple(t[0] for t in terms), tuple(t[1] for t in terms), tuple(t[2] for t in terms))

    @property
    def terms(self) -> list[list[float]]:
        return [[a, b, w] for a, b, w in zip(self.sin_amp, self.cos_amp, self.freq)]

    def arrays(self) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.offset,
            np.asarray(self.sin_amp, dtype=float),
            np.asarray(self.cos_amp, dtype=float),
            np.asarray(self.freq, dtype=float),
        )

    def bound(self) -> float:
        """Upper bound on ``|f(t)|`` over all time."""
        return abs(self.offset) + sum(abs(a) + abs(b) for a, b in zip(self.sin_amp, self.cos_amp))

    def __call__(self, t: float) -> tuple[float, float, float]:
        """Value and first two derivatives at ``t``."""
        f, df, ddf = self.offset, 0.0, 0.0
        for a, b, w in zip(self.sin_amp, self.cos_amp, self.freq):
            s, c = np.sin(w * t), np.cos(w * t)
            f += a * s + b * c
            df += w * (a * c - b * s)
            ddf -= w * w * (a * s + b * c)
        return float(f), float(df), float(ddf)


REFERENCE_LEADER = SinusoidSum.from_terms(0.0, [(1.0, 0.0, 1.0), (0.0, 0.75, 2.0)])
REFERENCE_DISTURBANCES = {
    "none": SinusoidSum(),
    "d1": SinusoidSum(0.25),
    "d2": SinusoidSum.from_terms(0.0, [(0.45, 0.0, 2.0)]),
    "d3": SinusoidSum.from_terms(0.0, [(0.7, 0.0, 2.0), (0.0, 0.3, 3.0)]),
}


@dataclass(frozen=True)
class LeaderSignal:
    """Broadcast leader position ``x0(t)``; followers also receive its derivatives."""

    kind: str = "paper"
    value: float = 0.0
    terms: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        if self.kind not in LEADER_KINDS:
            raise ValueError(f"unknown leader kind {self.kind!r}; expected one of {LEADER_KINDS}")
        object.__setattr__(self, "terms", tuple(tuple(map(float, t)) for t in self.terms))

    @property
    def signal(self) -> SinusoidSum:
        if self.kind == "paper":
            return REFERENCE_LEADER
        if self.kind == "zero":
            return SinusoidSum()
        if self.kind == "constant":
            return SinusoidSum(self.value)
        return SinusoidSum.from_terms(self.value, self.terms)


@dataclass(frozen=True)
class DisturbanceProfile:
    """Input disturbance applied to every follower, times a per-agent scale."""

    kind: str = "none"
    scale: tuple[float, ...] | None = None
    value: float = 0.0
    terms: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance {self.kind!r}; expected one of {DISTURBANCE_KINDS}")
        object.__setattr__(self, "terms", tuple(tuple(map(float, t)) for t in self.terms))
        if self.scale is not None:
            object.__setattr__(self, "scale", tuple(float(s) for s in self.scale))

    @property
    def signal(self) -> SinusoidSum:
        if self.kind == "custom":
            return SinusoidSum.from_terms(self.value, self.terms)
        return REFERENCE_DISTURBANCES[self.kind]

    def scale_vector(self, m: int) -> np.ndarray:
        if self.scale is None:
            return np.ones(m)
        if len(self.scale) != m:
            raise ValueError(f"disturbance scale has {len(self.scale)} entries, expected {m}")
        return np.asarray(self.scale, dtype=float)

    def bound(self, m: int) -> float:
        return self.signal.bound() * float(np.max(np.abs(self.scale_vector(m))))


def leader_eval(sig: LeaderSignal, t: float) -> tuple[float, float, float]:
    """``(x0, x0_dot, x0_ddot)`` at time ``t``."""
    return sig.signal(t)


def disturbance_eval(d: DisturbanceProfile, t: float, m: int) -> np.ndarray:
    return d.signal(t)[0] * d.scale_vector(m)
