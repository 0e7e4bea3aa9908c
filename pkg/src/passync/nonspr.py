"""Passivity-recovered controllers built around a phase-lead compensator.

The compensator ``C_w = phi (s+p)/(s+q)`` with ``p < q`` drives each follower
with ``u = C_w[K_hat e + J_hat Om2 + B_hat Om1]``, where ``Om2`` and ``Om1``
are the leader acceleration and velocity passed through ``C_w^{-1}``.

Scenario 1 exchanges shaped outputs ``y = x' + theta x`` and adapts on the
shaped error directly. Scenario 2 exchanges positions only and instead passes
the regressor through ``1/(s + theta)`` before the gradient update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import Network
from .plant import PlantParams, PlantState, as_vector, require_finite
from .spr import DEFAULT_GRID, CertificationReport, consensus_feed
from .errors import GridEmpty

CERTIFY_KINDS = ("unshaped", "scenario1", "scenario2")


@dataclass(frozen=True)
class CompensatorParams:
    phi: np.ndarray
    p: np.ndarray
    q: np.ndarray
    theta: np.ndarray
    theta0: float
    k_star: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray

    def __post_init__(self):
        m = as_vector(self.phi, name="phi").size
        for name in ("phi", "p", "q", "theta", "k_star", "gamma1", "gamma2", "gamma3"):
            arr = as_vector(getattr(self, name), m, name=name)
            require_finite(arr, what=name)
            if np.any(arr <= 0):
                raise ValueError(f"compensator parameter {name} must be strictly positive")
            object.__setattr__(self, name, arr)
        if not (np.isfinite(self.theta0) and self.theta0 > 0):
            raise ValueError("leader shaping constant theta0 must be strictly positive")
        object.__setattr__(self, "theta0", float(self.theta0))
        if np.any(self.p >= self.q):
            raise ValueError("phase lead requires zero p below pole q for every agent")

    @property
    def m(self) -> int:
        return self.phi.size

    @classmethod
    def default(cls, m: int, phi=None) -> "CompensatorParams":
        """Defaults tuned so that both shaped maps certify for the reference plants.

        ``phi`` defaults to the reference ``1.5 + 0.5 i``.
        """
        i = np.arange(1, m + 1, dtype=float)
        phi = 1.5 + 0.5 * i if phi is None else phi
        return cls(
            phi=phi, p=np.full(m, 5.0), q=np.full(m, 10.0), theta=np.full(m, 2.0), theta0=2.0,
            k_star=np.full(m, 80.0), gamma1=np.full(m, 5.0), gamma2=np.full(m, 5.0), gamma3=np.full(m, 5.0),
        )


@dataclass
class NonSprControllerState:
    """Filter states and the estimates ``(K_hat, J_hat, B_hat)``.

    ``xi`` feeds the forward compensator, ``om2``/``om1`` the inverse
    compensator acting on the leader's acceleration/velocity, and ``f`` the
    three Scenario 2 regressor pre-filters (unused in Scenario 1).
    """

    xi: np.ndarray
    om2: np.ndarray
    om1: np.ndarray
    k_hat: np.ndarray
    j_hat: np.ndarray
    b_hat: np.ndarray
    f: np.ndarray

    @classmethod
    def initial(cls, cp: CompensatorParams) -> "NonSprControllerState":
        m = cp.m
        return cls(np.zeros(m), np.zeros(m), np.zeros(m), cp.k_star.copy(), np.zeros(m), np.zeros(m), np.zeros((3, m)))


@dataclass(frozen=True)
class ShapedSignals:
    scenario: int
    err: np.ndarray
    regressor: np.ndarray
    omega_dd: np.ndarray
    omega_d: np.ndarray
    comp_input: np.ndarray
    u: np.ndarray
    xi_dot: np.ndarray
    om2_dot: np.ndarray
    om1_dot: np.ndarray
    f_dot: np.ndarray | None = None
    y: np.ndarray | None = None
    y0: float | None = None
    z: np.ndarray | None = None


def lead_filter_step_deriv(state, inp, p, q, phi, inverse: bool = False):
    """Return ``(d state/dt, output)`` of ``phi (s+p)/(s+q)`` or its inverse.

    Forward realization: ``state' = -q state + in``, ``out = phi ((p-q) state + in)``.
    The inverse swaps the roles of ``p`` and ``q`` and uses gain ``1/phi``.
    """
    args = [np.asarray(a, dtype=float) for a in (state, inp, p, q, phi)]
    fn = _kernels.lead_filter_inverse if inverse else _kernels.lead_filter
    d, out = fn(*args)
    return d, out


def prefilter_deriv(state, inp, theta):
    """``1/(s + theta)``: output is the state itself."""
    return -np.asarray(theta) * np.asarray(state) + np.asarray(inp)


def _leader_filters(cp: CompensatorParams, cs: NonSprControllerState, x0_dot, x0_ddot):
    om2_dot, omega_dd = _kernels.lead_filter_inverse(cs.om2, np.full(cp.m, x0_ddot), cp.p, cp.q, cp.phi)
    om1_dot, omega_d = _kernels.lead_filter_inverse(cs.om1, np.full(cp.m, x0_dot), cp.p, cp.q, cp.phi)
    return om2_dot, omega_dd, om1_dot, omega_d


def _check(net, cp, cs, s, leader):
    vals = np.asarray([float(c) for c in leader])
    require_finite(s.x, s.v, cs.xi, cs.om2, cs.om1, cs.k_hat, cs.j_hat, cs.b_hat, cs.f, vals)
    if not (net.m == cp.m == s.x.size):
        raise ValueError("network, compensator and state disagree on the number of followers")
    return vals


def scenario1_control(net: Network, cp: CompensatorParams, cs: NonSprControllerState, s: PlantState, leader):
    """Output-shaped control; requires each agent's own velocity."""
    x0, x0_dot, x0_ddot = _check(net, cp, cs, s, leader)
    y = s.v + cp.theta * s.x
    y0 = x0_dot + cp.theta0 * x0
    z_y = consensus_feed(net, y, y0)
    err = z_y - y
    om2_dot, omega_dd, om1_dot, omega_d = _leader_filters(cp, cs, x0_dot, x0_ddot)
    comp_in = cs.k_hat * err + cs.j_hat * omega_dd + cs.b_hat * omega_d
    xi_dot, u = _kernels.lead_filter(cs.xi, comp_in, cp.p, cp.q, cp.phi)
    sig = ShapedSignals(
        scenario=1, err=err, regressor=np.vstack([err, omega_dd, omega_d]), omega_dd=omega_dd,
        omega_d=omega_d, comp_input=comp_in, u=u, xi_dot=xi_dot, om2_dot=om2_dot, om1_dot=om1_dot,
        y=y, y0=y0, z=z_y,
    )
    return u, sig


def scenario1_adapt_deriv(cp: CompensatorParams, signals: ShapedSignals) -> np.ndarray:
    """``(K_hat', J_hat', B_hat')`` as a ``(3, m)`` array: ``gamma_k * e_y * eta_k``."""
    gains = np.vstack([cp.gamma1, cp.gamma2, cp.gamma3])
    return gains * signals.err * signals.regressor


def scenario2_control(net: Network, cp: CompensatorParams, cs: NonSprControllerState, s: PlantState, leader):
    """Position-only control; the returned regressor is the pre-filtered one.

    Depends on ``s.x`` alone: no velocity (own or neighbor) enters the
    control or the adaptation.
    """
    x0, x0_dot, x0_ddot = _check(net, cp, cs, s, leader)
    z = consensus_feed(net, s.x, x0)
    err = z - s.x
    om2_dot, omega_dd, om1_dot, omega_d = _leader_filters(cp, cs, x0_dot, x0_ddot)
    comp_in = cs.k_hat * err + cs.j_hat * omega_dd + cs.b_hat * omega_d
    xi_dot, u = _kernels.lead_filter(cs.xi, comp_in, cp.p, cp.q, cp.phi)
    raw = np.vstack([err, omega_dd, omega_d])
    f = np.asarray(cs.f, dtype=float).reshape(3, cp.m)
    sig = ShapedSignals(
        scenario=2, err=err, regressor=f.copy(), omega_dd=omega_dd, omega_d=omega_d,
        comp_input=comp_in, u=u, xi_dot=xi_dot, om2_dot=om2_dot, om1_dot=om1_dot,
        f_dot=prefilter_deriv(f, raw, cp.theta), z=z,
    )
    return u, sig


def scenario2_adapt_deriv(cp: CompensatorParams, signals: ShapedSignals) -> np.ndarray:
    """Uniform gradient law ``gamma1 * e * eta_bar`` on all three channels."""
    return cp.gamma1 * signals.err * signals.regressor


def loop_polynomials(J: float, B: float, cp: CompensatorParams, i: int, which: str):
    """Numerator and denominator coefficients (highest power first) of one agent's map."""
    phi, p, q, th, k = cp.phi[i], cp.p[i], cp.q[i], cp.theta[i], cp.k_star[i]
    plant_q = np.polymul([J, B, 0.0], [1.0, q])
    comp_num = phi * np.array([1.0, p])
    shaped = np.polymul(comp_num, [1.0, th])
    if which == "unshaped":
        return comp_num, np.polyadd(plant_q, k * comp_num)
    if which == "scenario1":
        return shaped, np.polyadd(plant_q, k * shaped)
    if which == "scenario2":
        return shaped, np.polyadd(plant_q, k * comp_num)
    raise ValueError(f"unknown map {which!r}; expected one of {CERTIFY_KINDS}")


def nonspr_certify(p: PlantParams, cp: CompensatorParams, which: str = "scenario1", omega=DEFAULT_GRID) -> CertificationReport:
    omega = np.asarray(omega, dtype=float)
    if omega.size == 0:
        raise GridEmpty("frequency grid is empty")
    which = which.lower()
    s = 1j * omega
    min_re = np.empty(p.m)
    arg = np.empty(p.m)
    hurwitz = np.empty(p.m, dtype=bool)
    rel_deg = 0
    reasons = []
    for i in range(p.m):
        num, den = loop_polynomials(p.J[i], p.B[i], cp, i, which)
        num, den = np.trim_zeros(num, "f"), np.trim_zeros(den, "f")
        rel_deg = max(rel_deg, den.size - num.size)
        re = (np.polyval(num, s) / np.polyval(den, s)).real
        k = int(np.argmin(re))
        min_re[i], arg[i] = re[k], omega[k]
        hurwitz[i] = bool(np.all(np.roots(den).real < 0))
        if not hurwitz[i]:
            reasons.append(f"agent {i + 1}: closed-loop denominator not Hurwitz")
        elif min_re[i] <= 0:
            reasons.append(f"agent {i + 1}: min Re W(jw) = {min_re[i]:.6g} <= 0")
    if rel_deg > 1:
        reasons.insert(0, f"relative degree {rel_deg}")
    verdict = rel_deg <= 1 and bool(np.all(hurwitz)) and bool(np.all(min_re > 0))
    return CertificationReport(
        kind=which, min_real=min_re, argmin_omega=arg, relative_degree=rel_deg,
        hurwitz=hurwitz, margin=None, verdict=verdict, reasons=tuple(reasons),
    )
