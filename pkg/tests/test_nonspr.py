import numpy as np
import pytest

from passync import ScenarioConfig, simulate
from passync import _kernels
from passync.graph import Network, TopologyPreset, build_preset, normalize
from passync.nonspr import (
    CompensatorParams,
    NonSprControllerState,
    lead_filter_step_deriv,
    loop_polynomials,
    nonspr_certify,
    prefilter_deriv,
    scenario1_adapt_deriv,
    scenario1_control,
    scenario2_adapt_deriv,
    scenario2_control,
)
from passync.plant import PlantState, paper_params
from passync.suite import NONSPR_TOL


def rk4_scalar(f, y, t_end, dt=1e-3):
    """Plain RK4 on a scalar ODE y' = f(t, y); independent of the package integrator."""
    n = int(round(t_end / dt))
    t = 0.0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + dt / 2, y + dt / 2 * k1)
        k3 = f(t + dt / 2, y + dt / 2 * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return y


def test_pole_zero_cancellation_is_pure_gain():
    for state in (0.0, 3.0, -7.5):
        _, out = lead_filter_step_deriv(state, 2.0, 4.0, 4.0, 1.5)
        assert out == pytest.approx(3.0)


def test_dc_gain_of_lead_filter():
    p, q, phi, w = 2.0, 8.0, 1.5, 0.7
    settled = w / q
    d, out = lead_filter_step_deriv(settled, w, p, q, phi)
    assert d == pytest.approx(0.0, abs=1e-15)
    assert out == pytest.approx(phi * p / q * w)


def test_inverse_dc_gain():
    p, q, phi, w = 2.0, 8.0, 1.5, 0.7
    d, out = lead_filter_step_deriv(w / p, w, p, q, phi, inverse=True)
    assert d == pytest.approx(0.0, abs=1e-15)
    assert out == pytest.approx(q / (p * phi) * w)


@pytest.mark.parametrize("inverse", [False, True])
def test_step_response_matches_closed_form(inverse):
    p, q, phi, w = 1.5, 6.0, 2.0, 1.0
    a = p if inverse else q
    times = np.linspace(0.05, 3.2, 64)
    dt = 1e-3
    state, t = 0.0, 0.0
    for tk in times:
        n = int(round((tk - t) / dt))
        for _ in range(n):
            f = lambda y: lead_filter_step_deriv(y, w, p, q, phi, inverse)[0]
            k1 = f(state)
            k2 = f(state + dt / 2 * k1)
            k3 = f(state + dt / 2 * k2)
            k4 = f(state + dt * k3)
            state += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += n * dt
        _, out = lead_filter_step_deriv(state, w, p, q, phi, inverse)
        x = w * (1 - np.exp(-a * t)) / a
        expected = ((q - p) * x + w) / phi if inverse else phi * ((p - q) * x + w)
        assert out == pytest.approx(expected, abs=1e-6)


def test_compensator_then_inverse_recovers_signal():
    p, q, phi = 2.0, 10.0, 3.0

    def f(t, y):
        d1, c = lead_filter_step_deriv(y[0], np.sin(t), p, q, phi)
        d2, _ = lead_filter_step_deriv(y[1], c, p, q, phi, inverse=True)
        return np.array([d1, d2])

    y = rk4_scalar(f, np.zeros(2), 20.0)
    _, c = lead_filter_step_deriv(y[0], np.sin(20.0), p, q, phi)
    _, back = lead_filter_step_deriv(y[1], c, p, q, phi, inverse=True)
    assert abs(back - np.sin(20.0)) < 0.01


def test_prefilter_dc_and_large_theta():
    for theta in (2.0, 50.0):
        assert prefilter_deriv(3.0 / theta, 3.0, theta) == pytest.approx(0.0)
    theta = 200.0
    settled = rk4_scalar(lambda t, y: prefilter_deriv(y, np.sin(0.5 * t), theta), 0.0, 10.0, dt=1e-4)
    assert settled == pytest.approx(np.sin(5.0) / theta, rel=1e-2)


def test_compensator_validation():
    with pytest.raises(ValueError):
        CompensatorParams.default(2).__class__(
            phi=[1.0], p=[5.0], q=[10.0], theta=[0.0], theta0=1.0, k_star=[1.0],
            gamma1=[1.0], gamma2=[1.0], gamma3=[1.0],
        )
    with pytest.raises(ValueError):
        CompensatorParams(phi=[1.0], p=[10.0], q=[5.0], theta=[1.0], theta0=1.0, k_star=[1.0],
                          gamma1=[1.0], gamma2=[1.0], gamma3=[1.0])
    with pytest.raises(ValueError):
        CompensatorParams(phi=[1.0], p=[1.0], q=[5.0], theta=[1.0], theta0=0.0, k_star=[1.0],
                          gamma1=[1.0], gamma2=[1.0], gamma3=[1.0])


def disconnected(m):
    return Network(m, ())


def test_scenario1_disconnected_reduction():
    m = 3
    cp = CompensatorParams.default(m)
    s = PlantState(np.array([0.5, -1.0, 2.0]), np.array([0.1, 0.2, -0.3]))
    _, sig = scenario1_control(disconnected(m), cp, NonSprControllerState.initial(cp), s, (1.0, 0.5, 0.2))
    np.testing.assert_allclose(sig.err, -sig.y)
    np.testing.assert_allclose(sig.y - cp.theta * s.x, s.v, atol=1e-12)


def test_scenario1_equilibrium_constant_leader():
    m, c = 3, 1.7
    cp = CompensatorParams.default(m)
    net = normalize(build_preset(TopologyPreset("cyclic", m)))
    p = paper_params(m)
    cs = NonSprControllerState.initial(cp)
    cs.b_hat = p.B.copy()
    u, sig = scenario1_control(net, cp, cs, PlantState(np.full(m, c), np.zeros(m)), (c, 0.0, 0.0))
    np.testing.assert_allclose(sig.err, 0.0, atol=1e-15)
    np.testing.assert_allclose(u, 0.0, atol=1e-15)


def test_scenario1_adaptive_law():
    cp = CompensatorParams.default(1)
    cs = NonSprControllerState.initial(cp)
    _, sig = scenario1_control(normalize(build_preset(TopologyPreset("star", 1))), cp, cs,
                               PlantState([0.0], [0.0]), (0.0, 0.0, 0.0))
    np.testing.assert_array_equal(scenario1_adapt_deriv(cp, sig), 0.0)

    class Sig:
        err = np.array([1.0])
        regressor = np.array([[1.0], [-0.5], [0.3]])

    d = scenario1_adapt_deriv(cp, Sig)
    # Implemented sign: + gamma * e * eta (see the project notes on the adaptive-law sign).
    assert d[1, 0] == pytest.approx(-2.5)
    assert d[0, 0] >= 0


def test_scenario2_reduction_and_position_only():
    m = 3
    cp = CompensatorParams.default(m)
    cs = NonSprControllerState.initial(cp)
    cs.f = np.arange(9.0).reshape(3, m)
    x = np.array([0.4, -0.2, 1.0])
    u1, sig = scenario2_control(disconnected(m), cp, cs, PlantState(x, np.zeros(m)), (0.3, 0.1, -0.2))
    np.testing.assert_allclose(sig.err, -x)
    np.testing.assert_allclose(sig.f_dot[0], -cp.theta * cs.f[0] - x)
    u2, sig2 = scenario2_control(disconnected(m), cp, cs, PlantState(x, np.array([5.0, -9.0, 3.0])), (0.3, 0.1, -0.2))
    np.testing.assert_array_equal(u1, u2)
    np.testing.assert_array_equal(scenario2_adapt_deriv(cp, sig), scenario2_adapt_deriv(cp, sig2))


def test_scenario2_adaptive_law():
    cp = CompensatorParams.default(1)

    class Sig:
        err = np.array([0.2])
        regressor = np.array([[1.0], [1.0], [1.0]])

    np.testing.assert_allclose(scenario2_adapt_deriv(cp, Sig), 1.0)

    class Zero:
        err = np.array([0.0])
        regressor = np.array([[3.0], [1.0], [2.0]])

    np.testing.assert_array_equal(scenario2_adapt_deriv(cp, Zero), 0.0)


def test_certification_defaults():
    p, cp = paper_params(8), CompensatorParams.default(8)
    un = nonspr_certify(p, cp, "unshaped")
    assert not un.verdict and un.relative_degree == 2 and un.reasons[0] == "relative degree 2"
    s1 = nonspr_certify(p, cp, "scenario1")
    s2 = nonspr_certify(p, cp, "scenario2")
    assert s1.verdict and s1.relative_degree == 1 and np.all(s1.min_real > 0)
    assert s2.verdict and s2.relative_degree == 1 and np.all(s2.min_real > 0)


def test_certify_against_direct_rational_evaluation():
    p, cp = paper_params(8), CompensatorParams.default(8)
    w = np.logspace(-3, 3, 400)
    s = 1j * w
    i = 4
    cw = cp.phi[i] * (s + cp.p[i]) / (s + cp.q[i])
    plant = p.J[i] * s**2 + p.B[i] * s
    w1 = cw * (s + cp.theta[i]) / (plant + cp.k_star[i] * cw * (s + cp.theta[i]))
    w2 = cw / (plant + cp.k_star[i] * cw) * (s + cp.theta[i])
    assert nonspr_certify(p, cp, "scenario1").min_real[i] == pytest.approx(w1.real.min(), rel=1e-9)
    assert nonspr_certify(p, cp, "scenario2").min_real[i] == pytest.approx(w2.real.min(), rel=1e-9)


def test_loop_polynomial_unknown_map():
    with pytest.raises(ValueError):
        loop_polynomials(1.0, 0.0, CompensatorParams.default(1), 0, "shaped")


def test_unstable_denominator_reported():
    cp = CompensatorParams(phi=[1.0], p=[1.0], q=[2.0], theta=[1.0], theta0=1.0, k_star=[1e-3],
                           gamma1=[1.0], gamma2=[1.0], gamma3=[1.0])
    rep = nonspr_certify(paper_params(1), cp, "scenario1")
    assert not rep.verdict and not rep.hurwitz[0]
    assert "not Hurwitz" in rep.reasons[0]


@pytest.mark.parametrize("kind", [_kernels.SCENARIO1, _kernels.SCENARIO2])
def test_wrappers_match_kernel(kind):
    m = 8
    net = normalize(build_preset(TopologyPreset("arbitrary", m)))
    p, cp = paper_params(m), CompensatorParams.default(m)
    rng = np.random.default_rng(7)
    s = PlantState(rng.normal(size=m), rng.normal(size=m))
    cs = NonSprControllerState(*(rng.normal(size=m) for _ in range(6)), rng.normal(size=(3, m)))
    t = 2.3
    lead = (np.sin(t) + 0.75 * np.cos(2 * t), np.cos(t) - 1.5 * np.sin(2 * t), -np.sin(t) - 3 * np.cos(2 * t))
    if kind == _kernels.SCENARIO1:
        u, sig = scenario1_control(net, cp, cs, s, lead)
        adapt = scenario1_adapt_deriv(cp, sig)
    else:
        u, sig = scenario2_control(net, cp, cs, s, lead)
        adapt = scenario2_adapt_deriv(cp, sig)
    vdot = (u - p.B * s.v) / p.J
    expected = [s.v, vdot, sig.xi_dot, sig.om2_dot, sig.om1_dot, *adapt]
    if kind == _kernels.SCENARIO2:
        expected += list(sig.f_dot)
    state = np.concatenate([s.x, s.v, cs.xi, cs.om2, cs.om1, cs.k_hat, cs.j_hat, cs.b_hat]
                           + ([cs.f.ravel()] if kind == _kernels.SCENARIO2 else []))
    indptr, indices, weights = net.csr
    graph = (indptr, indices, weights, np.asarray(net.leader_weights))
    ctrl = (cp.phi, np.zeros(m), cp.gamma1, cp.gamma2, cp.gamma3, cp.p, cp.q, cp.theta, cp.theta0)
    leader = (0.0, np.array([1.0, 0.0]), np.array([0.0, 0.75]), np.array([1.0, 2.0]))
    dist = (0.0, np.zeros(0), np.zeros(0), np.zeros(0), np.ones(m))
    out = _kernels.closed_loop_rhs(kind, t, state, graph, (p.J, p.B), ctrl, leader, dist)
    np.testing.assert_allclose(out, np.concatenate(expected), rtol=1e-12, atol=1e-12)


def test_ideal_parameter_tracking_single_agent():
    p = paper_params(1)
    cfg = ScenarioConfig.from_dict({
        "topology": {"kind": "star", "m": 1},
        "controller": {"kind": "scenario1", "j_hat_init": float(p.J[0]), "b_hat_init": float(p.B[0])},
    })
    run = simulate(cfg)
    assert run.metrics["steady_state_err"] < 1e-3


def test_scenario2_certified_default_synchronizes():
    cfg = ScenarioConfig.from_dict({"controller": {"kind": "scenario2"}})
    assert nonspr_certify(cfg.plant_params(), cfg.compensator(), "scenario2").verdict
    run = simulate(cfg)
    assert np.max(np.abs(run.e[-1])) < NONSPR_TOL
    assert np.all(np.isfinite(run.states))
