"""Compiled per-step laws and the fixed-step RK4 driver.

The public modules (``plant``, ``spr``, ``nonspr``) wrap these functions, and
the integrator calls them directly, so both paths share one implementation.

State layouts (blocks of length m):
    SPR         x, v, ie, J_hat, B_hat
    SCENARIO1   x, v, xi, om2, om1, K_hat, J_hat, B_hat
    SCENARIO2   SCENARIO1 blocks followed by f1, f2, f3 (regressor pre-filters)
"""

import numpy as np
from numba import njit

SPR = 0
SCENARIO1 = 1
SCENARIO2 = 2

N_BLOCKS = (5, 8, 11)

STATUS_OK = 0
STATUS_BLOWUP = 1


@njit(cache=True)
def sinusoid_sum(offset, sin_amp, cos_amp, freq, t):
    f = offset
    df = 0.0
    ddf = 0.0
    for k in range(freq.size):
        w = freq[k]
        s = np.sin(w * t)
        c = np.cos(w * t)
        f += sin_amp[k] * s + cos_amp[k] * c
        df += w * (sin_amp[k] * c - cos_amp[k] * s)
        ddf -= w * w * (sin_amp[k] * s + cos_amp[k] * c)
    return f, df, ddf


@njit(cache=True)
def neighbor_feed(indptr, indices, weights, a0, values, leader_value):
    """``A_m @ values + A_0 @ (leader_value * 1)`` over a CSR adjacency."""
    m = a0.size
    out = np.empty(m)
    for i in range(m):
        acc = a0[i] * leader_value
        for k in range(indptr[i], indptr[i + 1]):
            acc += weights[k] * values[indices[k]]
        out[i] = acc
    return out


@njit(cache=True)
def plant_accel(J, B, v, u, d):
    return (u + d - B * v) / J


@njit(cache=True)
def spr_law(z, z_rate, x, v, ie, j_hat, b_hat, phi, lam, x0_ddot):
    """Reparameterized control ``u = phi*theta + J_hat*zeta + B_hat*v``.

    Returns ``(u, e, e_dot, zeta, theta)``.
    """
    e = z - x
    e_dot = z_rate - v
    lam2 = lam * lam
    zeta = x0_ddot + 2.0 * lam * e_dot + lam2 * e
    theta = e_dot + 2.0 * lam * e + lam2 * ie
    u = phi * theta + j_hat * zeta + b_hat * v
    return u, e, e_dot, zeta, theta


@njit(cache=True)
def lead_filter(state, inp, p, q, phi):
    """``phi (s+p)/(s+q)``: returns ``(d state/dt, output)``."""
    return -q * state + inp, phi * ((p - q) * state + inp)


@njit(cache=True)
def lead_filter_inverse(state, inp, p, q, phi):
    """``(1/phi) (s+q)/(s+p)``: returns ``(d state/dt, output)``."""
    return -p * state + inp, ((q - p) * state + inp) / phi


@njit(cache=True)
def _feed_row(i, indptr, indices, weights, a0, values, leader_value):
    acc = a0[i] * leader_value
    for k in range(indptr[i], indptr[i + 1]):
        acc += weights[k] * values[indices[k]]
    return acc


@njit(cache=True)
def closed_loop_rhs_into(kind, t, s, out, graph, plant, ctrl, leader, dist):
    """Write the stacked closed-loop vector field at ``(t, s)`` into ``out``.

    Agents are processed row by row with the scalar forms of the laws above;
    no agent writes another agent's entries.
    """
    indptr, indices, weights, a0 = graph
    J, B = plant
    phi, lam, g1, g2, g3, p, q, theta_s, theta0 = ctrl
    x0, x0_dot, x0_ddot = sinusoid_sum(leader[0], leader[1], leader[2], leader[3], t)
    d0 = sinusoid_sum(dist[0], dist[1], dist[2], dist[3], t)[0]
    dscale = dist[4]
    m = J.size
    x = s[0:m]
    v = s[m:2 * m]

    if kind == SPR:
        for i in range(m):
            z = _feed_row(i, indptr, indices, weights, a0, x, x0)
            z_rate = _feed_row(i, indptr, indices, weights, a0, v, x0_dot)
            u, e, e_dot, zeta, theta = spr_law(
                z, z_rate, x[i], v[i], s[2 * m + i], s[3 * m + i], s[4 * m + i], phi[i], lam[i], x0_ddot
            )
            out[i] = v[i]
            out[m + i] = plant_accel(J[i], B[i], v[i], u, d0 * dscale[i])
            out[2 * m + i] = e
            out[3 * m + i] = g1[i] * theta * zeta
            out[4 * m + i] = g2[i] * theta * v[i]
        return

    y0 = x0_dot + theta0 * x0
    for i in range(m):
        dom2, omega_dd = lead_filter_inverse(s[3 * m + i], x0_ddot, p[i], q[i], phi[i])
        dom1, omega_d = lead_filter_inverse(s[4 * m + i], x0_dot, p[i], q[i], phi[i])
        if kind == SCENARIO1:
            acc = a0[i] * y0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                acc += weights[k] * (v[j] + theta_s[j] * x[j])
            err = acc - (v[i] + theta_s[i] * x[i])
            out[5 * m + i] = g1[i] * err * err
            out[6 * m + i] = g2[i] * err * omega_dd
            out[7 * m + i] = g3[i] * err * omega_d
        else:
            err = _feed_row(i, indptr, indices, weights, a0, x, x0) - x[i]
            f1 = s[8 * m + i]
            f2 = s[9 * m + i]
            f3 = s[10 * m + i]
            out[5 * m + i] = g1[i] * err * f1
            out[6 * m + i] = g1[i] * err * f2
            out[7 * m + i] = g1[i] * err * f3
            out[8 * m + i] = -theta_s[i] * f1 + err
            out[9 * m + i] = -theta_s[i] * f2 + omega_dd
            out[10 * m + i] = -theta_s[i] * f3 + omega_d
        w_in = s[5 * m + i] * err + s[6 * m + i] * omega_dd + s[7 * m + i] * omega_d
        dxi, u = lead_filter(s[2 * m + i], w_in, p[i], q[i], phi[i])
        out[i] = v[i]
        out[m + i] = plant_accel(J[i], B[i], v[i], u, d0 * dscale[i])
        out[2 * m + i] = dxi
        out[3 * m + i] = dom2
        out[4 * m + i] = dom1


@njit(cache=True)
def closed_loop_rhs(kind, t, s, graph, plant, ctrl, leader, dist):
    out = np.empty_like(s)
    closed_loop_rhs_into(kind, t, s, out, graph, plant, ctrl, leader, dist)
    return out


@njit(cache=True)
def _rk4_into(kind, t, s, dt, out, k1, k2, k3, k4, tmp, graph, plant, ctrl, leader, dist):
    n = s.size
    h = 0.5 * dt
    closed_loop_rhs_into(kind, t, s, k1, graph, plant, ctrl, leader, dist)
    for j in range(n):
        tmp[j] = s[j] + h * k1[j]
    closed_loop_rhs_into(kind, t + h, tmp, k2, graph, plant, ctrl, leader, dist)
    for j in range(n):
        tmp[j] = s[j] + h * k2[j]
    closed_loop_rhs_into(kind, t + h, tmp, k3, graph, plant, ctrl, leader, dist)
    for j in range(n):
        tmp[j] = s[j] + dt * k3[j]
    closed_loop_rhs_into(kind, t + dt, tmp, k4, graph, plant, ctrl, leader, dist)
    c = dt / 6.0
    for j in range(n):
        out[j] = s[j] + c * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True)
def rk4_step(kind, t, s, dt, graph, plant, ctrl, leader, dist):
    n = s.size
    out = np.empty(n)
    _rk4_into(kind, t, s, dt, out, np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n),
              graph, plant, ctrl, leader, dist)
    return out


@njit(cache=True)
def position_error(s, t, graph, leader, m):
    indptr, indices, weights, a0 = graph
    x0 = sinusoid_sum(leader[0], leader[1], leader[2], leader[3], t)[0]
    x = s[0:m]
    return neighbor_feed(indptr, indices, weights, a0, x, x0) - x


@njit(cache=True)
def integrate(kind, s0, dt, n_steps, stride, ss_start, threshold, graph, plant, ctrl, leader, dist):
    """Fixed-step RK4 from ``t = 0`` to ``n_steps * dt``.

    Metrics use every step; trajectories keep every ``stride``-th step plus the
    last one. Returns ``(times, states, errors, sync_l2, steady_err, status,
    fail_time)``.
    """
    indptr, indices, weights, a0 = graph
    m = plant[0].size
    n = s0.size
    n_rec = n_steps // stride + 1
    if n_steps % stride:
        n_rec += 1
    times = np.empty(n_rec)
    states = np.empty((n_rec, n))
    errors = np.empty((n_rec, m))
    e = np.empty(m)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)

    s = s0.copy()
    nxt = np.empty(n)
    rec = 0
    sync_l2 = 0.0
    steady = 0.0
    prev_sq = 0.0
    status = STATUS_OK
    fail_time = np.nan
    for k in range(n_steps + 1):
        t = k * dt
        x0 = sinusoid_sum(leader[0], leader[1], leader[2], leader[3], t)[0]
        sq = 0.0
        emax = 0.0
        for i in range(m):
            e[i] = _feed_row(i, indptr, indices, weights, a0, s, x0) - s[i]
            sq += e[i] * e[i]
            emax = max(emax, abs(e[i]))
        if k > 0:
            sync_l2 += 0.5 * dt * (sq + prev_sq)
        prev_sq = sq
        if k >= ss_start:
            steady = max(steady, emax)
        if k % stride == 0 or k == n_steps:
            times[rec] = t
            states[rec] = s
            errors[rec] = e
            rec += 1
        if k == n_steps:
            break
        _rk4_into(kind, t, s, dt, nxt, k1, k2, k3, k4, tmp, graph, plant, ctrl, leader, dist)
        big = 0.0
        bad = False
        for j in range(n):
            a = abs(nxt[j])
            if not a <= threshold:
                bad = True
                break
            big = max(big, a)
        if bad:
            status = STATUS_BLOWUP
            fail_time = (k + 1) * dt
            break
        s, nxt = nxt, s
    return times[:rec], states[:rec], errors[:rec], sync_l2, steady, status, fail_time
