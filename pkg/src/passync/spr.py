"""Passivity-certified controller: reparameterized PID-type law with gradient adaptation.

Per follower ``i`` with consensus error ``e = z - x``::

    theta = e' + 2 lam e + lam^2 int(e)
    zeta  = x0'' + 2 lam e' + lam^2 e
    u     = phi theta + J_hat zeta + B_hat v
    J_hat' = gamma1 theta zeta,   B_hat' = gamma2 theta v
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import Network
from .plant import PlantParams, PlantState, as_vector, require_finite
from .errors import GridEmpty

DEFAULT_GRID = np.logspace(-3.0, 3.0, 400)


@dataclass(frozen=True)
class SprGains:
    phi: np.ndarray
    lam: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self):
        m = as_vector(self.phi, name="phi").size
        for name in ("phi", "lam", "gamma1", "gamma2"):
            arr = as_vector(getattr(self, name), m, name=name)
            require_finite(arr, what=name)
            if np.any(arr <= 0):
                raise ValueError(f"gain {name} must be strictly positive")
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.phi.size

    @classmethod
    def paper(cls, m: int) -> "SprGains":
        """``phi_i = 1.5 + 0.5 i``, ``lam_i = 1``, adaptation gains 5."""
        i = np.arange(1, m + 1, dtype=float)
        return cls(1.5 + 0.5 * i, np.ones(m), np.full(m, 5.0), np.full(m, 5.0))


@dataclass
class SprControllerState:
    """Integral of the consensus error and the two parameter estimates."""

    ie: np.ndarray
    j_hat: np.ndarray
    b_hat: np.ndarray

    @classmethod
    def zeros(cls, m: int) -> "SprControllerState":
        return cls(np.zeros(m), np.zeros(m), np.zeros(m))


@dataclass(frozen=True)
class SprSignals:
    z: np.ndarray
    e: np.ndarray
    e_dot: np.ndarray
    zeta: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    u: np.ndarray

    @property
    def regressor(self) -> np.ndarray:
        """``eta = (zeta, v)`` stacked as a ``(2, m)`` array."""
        return np.vstack([self.zeta, self.v])


def consensus_feed(net: Network, x, x0: float) -> np.ndarray:
    """``z = A_m x + A_0 x0``: neighbor positions plus the leader broadcast."""
    indptr, indices, weights = net.csr
    return _kernels.neighbor_feed(indptr, indices, weights, np.asarray(net.leader_weights), np.asarray(x, float), float(x0))


def consensus_rate(net: Network, v, x0_dot: float) -> np.ndarray:
    """``z' = A_m v + A_0 x0'``.

    Simulation privilege: this is the only place neighbor velocities are read.
    A deployed agent would replace it with a filtered derivative of the
    positions it receives.
    """
    indptr, indices, weights = net.csr
    return _kernels.neighbor_feed(indptr, indices, weights, np.asarray(net.leader_weights), np.asarray(v, float), float(x0_dot))


def spr_control(net: Network, gains: SprGains, cs: SprControllerState, s: PlantState, leader) -> tuple[np.ndarray, SprSignals]:
    x0, x0_dot, x0_ddot = (float(c) for c in leader)
    require_finite(s.x, s.v, cs.ie, cs.j_hat, cs.b_hat, np.array([x0, x0_dot, x0_ddot]))
    if not (net.m == gains.m == s.x.size):
        raise ValueError("network, gains and state disagree on the number of followers")
    z = consensus_feed(net, s.x, x0)
    z_rate = consensus_rate(net, s.v, x0_dot)
    u, e, e_dot, zeta, theta = _kernels.spr_law(
        z, z_rate, s.x, s.v, as_vector(cs.ie, net.m), as_vector(cs.j_hat, net.m),
        as_vector(cs.b_hat, net.m), gains.phi, gains.lam, x0_ddot,
    )
    return u, SprSignals(z, e, e_dot, zeta, theta, s.v.copy(), u)


def spr_adapt_deriv(gains: SprGains, signals: SprSignals) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(d J_hat/dt, d B_hat/dt, d ie/dt)``.

    The Lyapunov weight of the error channel is folded into the gains; see
    :func:`passync.engine.lyapunov_monitor` for the matching storage function.
    """
    return gains.gamma1 * signals.theta * signals.zeta, gains.gamma2 * signals.theta * signals.v, signals.e.copy()


@dataclass(frozen=True)
class GainCheck:
    margin: np.ndarray
    passed: np.ndarray

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))


def rh_gain_check(p: PlantParams, gains: SprGains) -> GainCheck:
    """Routh-Hurwitz margin ``2 (b_i + phi_i) - J_i lam_i`` of the cubic loop denominator."""
    margin = 2.0 * (p.B + gains.phi) - p.J * gains.lam
    return GainCheck(margin, margin > 0)


def spr_transfer(p: PlantParams, gains: SprGains, omega) -> np.ndarray:
    """``W_u,i(j w) = phi (s+lam)^2 / (J s^3 + (b+phi) s^2 + 2 phi lam s + phi lam^2)``, shape ``(m, n)``."""
    s = 1j * np.asarray(omega, dtype=float)[None, :]
    J, b = p.J[:, None], p.B[:, None]
    phi, lam = gains.phi[:, None], gains.lam[:, None]
    num = phi * (s + lam) ** 2
    den = J * s**3 + (b + phi) * s**2 + 2 * phi * lam * s + phi * lam**2
    return num / den


@dataclass(frozen=True)
class CertificationReport:
    """Per-agent frequency-domain certificate of one loop map."""

    kind: str
    min_real: np.ndarray
    argmin_omega: np.ndarray
    relative_degree: int
    hurwitz: np.ndarray
    margin: np.ndarray | None
    verdict: bool
    reasons: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "verdict": self.verdict,
            "relative_degree": self.relative_degree,
            "agents": [],
            "reasons": list(self.reasons),
        }
        for i in range(self.min_real.size):
            row = {
                "agent": i + 1,
                "min_real": float(self.min_real[i]),
                "argmin_omega": float(self.argmin_omega[i]),
                "hurwitz": bool(self.hurwitz[i]),
            }
            if self.margin is not None:
                row["rh_margin"] = float(self.margin[i])
            out["agents"].append(row)
        return out


def spr_certify_frequency(p: PlantParams, gains: SprGains, omega=DEFAULT_GRID) -> CertificationReport:
    omega = np.asarray(omega, dtype=float)
    if omega.size == 0:
        raise GridEmpty("frequency grid is empty")
    check = rh_gain_check(p, gains)
    w = spr_transfer(p, gains, omega)
    re = w.real
    idx = np.argmin(re, axis=1)
    min_re = re[np.arange(p.m), idx]
    reasons = []
    for i in np.flatnonzero(~check.passed):
        reasons.append(f"agent {i + 1}: Routh-Hurwitz margin {check.margin[i]:.6g} <= 0")
    for i in np.flatnonzero(check.passed & (min_re <= 0)):
        reasons.append(f"agent {i + 1}: min Re W(jw) = {min_re[i]:.6g} <= 0")
    verdict = check.all_passed and bool(np.all(min_re > 0))
    return CertificationReport(
        kind="spr", min_real=min_re, argmin_omega=omega[idx], relative_degree=1,
        hurwitz=check.passed, margin=check.margin, verdict=verdict, reasons=tuple(reasons),
    )
