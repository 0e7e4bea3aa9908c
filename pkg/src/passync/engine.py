"""Closed-loop integration, run metrics, Lyapunov monitoring and runtime benchmarks."""

from __future__ import annotations

import io
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import _kernels
from .config import ScenarioConfig, resolve_vector
from .errors import NumericalBlowup, WrongControllerKind
from .graph import Network, TopologyPreset, build_preset, normalize
from .plant import PlantParams
from .spr import rh_gain_check

KIND_CODES = {"spr": _kernels.SPR, "scenario1": _kernels.SCENARIO1, "scenario2": _kernels.SCENARIO2}

BLOCKS = {
    "spr": ("x", "v", "ie", "j_hat", "b_hat"),
    "scenario1": ("x", "v", "xi", "om2", "om1", "k_hat", "j_hat", "b_hat"),
    "scenario2": ("x", "v", "xi", "om2", "om1", "k_hat", "j_hat", "b_hat", "f1", "f2", "f3"),
}
ESTIMATES = {"spr": ("j_hat", "b_hat"), "scenario1": ("k_hat", "j_hat", "b_hat"), "scenario2": ("k_hat", "j_hat", "b_hat")}

STEADY_FRACTION = 0.9


@dataclass(frozen=True)
class StateLayout:
    """Named blocks of length ``m`` inside the flat integration state."""

    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in BLOCKS:
            raise WrongControllerKind(f"unknown controller kind {self.kind!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return BLOCKS[self.kind]

    @property
    def size(self) -> int:
        return len(self.names) * self.m

    def slice(self, name: str) -> slice:
        k = self.names.index(name)
        return slice(k * self.m, (k + 1) * self.m)

    def pack(self, blocks: dict) -> np.ndarray:
        out = np.zeros(self.size)
        for name, value in blocks.items():
            out[self.slice(name)] = value
        return out

    def unpack(self, s: np.ndarray) -> dict[str, np.ndarray]:
        s = np.asarray(s)
        return {name: s[..., self.slice(name)].copy() for name in self.names}


@dataclass(frozen=True)
class KernelProblem:
    """Everything the compiled integrator needs, resolved from a scenario."""

    kind: str
    layout: StateLayout
    network: Network
    plant: PlantParams
    s0: np.ndarray
    graph: tuple
    plant_args: tuple
    ctrl: tuple
    leader: tuple
    dist: tuple
    gains: object

    def rhs(self, t: float, s: np.ndarray) -> np.ndarray:
        return _kernels.closed_loop_rhs(KIND_CODES[self.kind], t, s, self.graph, self.plant_args, self.ctrl, self.leader, self.dist)

    def step(self, t: float, s: np.ndarray, dt: float) -> np.ndarray:
        return _kernels.rk4_step(KIND_CODES[self.kind], t, s, dt, self.graph, self.plant_args, self.ctrl, self.leader, self.dist)


def _graph_args(net: Network) -> tuple:
    indptr, indices, weights = net.csr
    return (indptr, indices, weights, np.asarray(net.leader_weights, dtype=float))


def prepare(cfg: ScenarioConfig) -> KernelProblem:
    net = cfg.network()
    plant = cfg.plant_params()
    m = plant.m
    kind = cfg.controller.kind
    layout = StateLayout(kind, m)
    x_init, v_init = cfg.initial_plant()
    c = cfg.controller
    blocks = {
        "x": x_init, "v": v_init,
        "j_hat": resolve_vector(c.j_hat_init, m, "controller.j_hat_init"),
        "b_hat": resolve_vector(c.b_hat_init, m, "controller.b_hat_init"),
    }
    zeros = np.zeros(m)
    if kind == "spr":
        gains = cfg.spr_gains()
        ctrl = (gains.phi, gains.lam, gains.gamma1, gains.gamma2, zeros, zeros, zeros, zeros, 0.0)
    else:
        gains = cfg.compensator()
        k0 = gains.k_star if c.k_hat_init is None else resolve_vector(c.k_hat_init, m, "controller.k_hat_init")
        blocks["k_hat"] = k0
        ctrl = (gains.phi, zeros, gains.gamma1, gains.gamma2, gains.gamma3, gains.p, gains.q, gains.theta, gains.theta0)
    leader = cfg.leader_signal().signal.arrays()
    dprof = cfg.disturbance_profile()
    dist = dprof.signal.arrays() + (dprof.scale_vector(m),)
    return KernelProblem(
        kind=kind, layout=layout, network=net, plant=plant, s0=layout.pack(blocks),
        graph=_graph_args(net), plant_args=(plant.J, plant.B), ctrl=ctrl,
        leader=leader, dist=dist, gains=gains,
    )


@dataclass(frozen=True)
class RunResult:
    config: ScenarioConfig
    layout: StateLayout
    times: np.ndarray
    states: np.ndarray
    errors: np.ndarray
    metrics: dict
    wall_clock_seconds: float
    plant: PlantParams
    gains: object
    network: Network

    @property
    def kind(self) -> str:
        return self.layout.kind

    @property
    def m(self) -> int:
        return self.layout.m

    @property
    def x(self) -> np.ndarray:
        return self.states[:, self.layout.slice("x")]

    @property
    def e(self) -> np.ndarray:
        return self.errors

    def block(self, name: str) -> np.ndarray:
        return self.states[:, self.layout.slice(name)]

    @property
    def estimates(self) -> dict[str, np.ndarray]:
        return {name: self.block(name) for name in ESTIMATES[self.kind]}

    def csv_header(self) -> list[str]:
        m = self.m
        cols = ["t"] + [f"x{i}" for i in range(1, m + 1)] + [f"e{i}" for i in range(1, m + 1)]
        for name in ESTIMATES[self.kind]:
            cols += [f"{name}{i}" for i in range(1, m + 1)]
        return cols

    def table(self) -> np.ndarray:
        parts = [self.times[:, None], self.x, self.errors] + [self.block(n) for n in ESTIMATES[self.kind]]
        return np.hstack(parts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.csv_header()) + "\n")
        np.savetxt(buf, self.table(), fmt="%.17g", delimiter=",", newline="\n")
        return buf.getvalue()

    def metrics_text(self) -> str:
        data = {"name": self.config.name, "controller": self.kind, "m": self.m, **self.metrics,
                "wall_clock_seconds": self.wall_clock_seconds}
        return yaml.safe_dump(data, sort_keys=False)

    def plot_data(self, csv_name: str = "plot.csv") -> str:
        """Paired ``t, |e_i|`` columns plus the error norm, with a gnuplot recipe in the header."""
        m = self.m
        norm = np.linalg.norm(self.errors, axis=1)
        cols = ["t"] + [f"e{i}" for i in range(1, m + 1)] + ["e_norm"]
        buf = io.StringIO()
        buf.write(f"# gnuplot: set datafile separator ','; plot for [k=2:{m + 2}] '{csv_name}' using 1:k with lines title columnhead\n")
        buf.write(",".join(cols) + "\n")
        np.savetxt(buf, np.hstack([self.times[:, None], self.errors, norm[:, None]]), fmt="%.17g", delimiter=",", newline="\n")
        return buf.getvalue()

    def recompute_metrics(self) -> dict:
        """Metrics from the stored (decimated) trajectories, for spot checks."""
        sq = np.sum(self.errors**2, axis=1)
        T = self.times[-1]
        mask = self.times >= STEADY_FRACTION * T - 1e-12
        return {
            "sync_l2": float(np.trapezoid(sq, self.times) if hasattr(np, "trapezoid") else np.trapz(sq, self.times)),
            "steady_state_err": float(np.max(np.abs(self.errors[mask]))),
        }


def _steady_start(n_steps: int) -> int:
    return int(math.ceil(STEADY_FRACTION * n_steps - 1e-9))


def simulate(cfg: ScenarioConfig) -> RunResult:
    """Integrate one scenario with fixed-step RK4; raises :class:`NumericalBlowup` on divergence."""
    cfg.validate()
    prob = prepare(cfg)
    ig = cfg.integrator
    n_steps = ig.n_steps
    start = time.perf_counter()
    times, states, errors, sync_l2, steady, status, fail_time = _kernels.integrate(
        KIND_CODES[prob.kind], prob.s0, ig.dt, n_steps, ig.stride, _steady_start(n_steps), ig.blowup,
        prob.graph, prob.plant_args, prob.ctrl, prob.leader, prob.dist,
    )
    wall = time.perf_counter() - start
    if status != _kernels.STATUS_OK:
        raise NumericalBlowup(fail_time, ig.blowup)
    final = prob.layout.unpack(states[-1])
    metrics = {
        "sync_l2": float(sync_l2),
        "steady_state_err": float(steady),
        "estimate_final": {n: final[n].tolist() for n in ESTIMATES[prob.kind]},
        "max_abs_estimate": float(max(np.max(np.abs(states[:, prob.layout.slice(n)])) for n in ESTIMATES[prob.kind])),
    }
    if prob.kind == "spr":
        metrics["rh_margin"] = rh_gain_check(prob.plant, prob.gains).margin.tolist()
    return RunResult(cfg, prob.layout, times, states, errors, metrics, wall, prob.plant, prob.gains, prob.network)


# -- analysis helpers -------------------------------------------------------


def spr_composite(prob: KernelProblem, t: float, s: np.ndarray) -> dict[str, np.ndarray]:
    """Recompute ``e, e_dot, zeta, theta`` of the SPR law at one state."""
    if prob.kind != "spr":
        raise WrongControllerKind("composite error is defined for the SPR controller only")
    b = prob.layout.unpack(s)
    x0, x0_dot, x0_ddot = _kernels.sinusoid_sum(*prob.leader, t)
    indptr, indices, weights, a0 = prob.graph
    z = _kernels.neighbor_feed(indptr, indices, weights, a0, b["x"], x0)
    z_rate = _kernels.neighbor_feed(indptr, indices, weights, a0, b["v"], x0_dot)
    g = prob.gains
    u, e, e_dot, zeta, theta = _kernels.spr_law(z, z_rate, b["x"], b["v"], b["ie"], b["j_hat"], b["b_hat"], g.phi, g.lam, x0_ddot)
    return {"u": u, "e": e, "e_dot": e_dot, "zeta": zeta, "theta": theta, **b}


def lyapunov_monitor(run: RunResult, true_params: PlantParams | None = None) -> np.ndarray:
    """``V = sum theta^2 + sum J_err^2/(gamma1 J) + B_err^2/(gamma2 J)`` on the recorded grid.

    ``true_params`` defaults to the plant the run was simulated with; the
    controller itself never sees these values.
    """
    if run.kind != "spr":
        raise WrongControllerKind("the Lyapunov monitor applies to SPR runs only")
    p = run.plant if true_params is None else true_params
    prob = prepare(run.config)
    g = run.gains
    out = np.empty(run.times.size)
    for k, (t, s) in enumerate(zip(run.times, run.states)):
        c = spr_composite(prob, t, s)
        jt, bt = c["j_hat"] - p.J, c["b_hat"] - p.B
        out[k] = np.sum(c["theta"] ** 2) + np.sum(jt**2 / (g.gamma1 * p.J)) + np.sum(bt**2 / (g.gamma2 * p.J))
    return out


def theta_rate_closed_form(prob: KernelProblem, t: float, s: np.ndarray) -> np.ndarray:
    """``-(phi/J) theta - (J_err zeta + B_err v)/J - delta/J`` (exact on star graphs)."""
    c = spr_composite(prob, t, s)
    J, B = prob.plant_args
    g = prob.gains
    delta = _kernels.sinusoid_sum(*prob.dist[:4], t)[0] * prob.dist[4]
    return -(g.phi / J) * c["theta"] - ((c["j_hat"] - J) * c["zeta"] + (c["b_hat"] - B) * c["v"]) / J - delta / J


@dataclass(frozen=True)
class OracleReport:
    worst: float
    mismatches: np.ndarray


def error_dynamics_oracle(samples: int = 100, dt: float = 1e-4, seed: int = 0, m: int = 8,
                          disturbance: str = "random", network: Network | None = None) -> OracleReport:
    """Central-difference check of the composite error dynamics on random samples.

    Each sample draws a state, estimates, a time and (with
    ``disturbance="random"``) a constant per-agent disturbance, steps the
    closed loop by ``+dt`` and ``-dt`` with RK4, and compares the difference
    quotient of ``theta`` with :func:`theta_rate_closed_form`. The identity is
    exact on a leader-only (star) graph, which is the default.
    """
    rng = np.random.default_rng(seed)
    net = network if network is not None else normalize(build_preset(TopologyPreset("star", m)))
    m = net.m
    base = ScenarioConfig.from_dict({"topology": {"kind": "star", "m": m}})
    prob0 = prepare(base)
    prob0 = _with_graph(prob0, net)
    worst = 0.0
    out = np.empty(samples)
    for k in range(samples):
        if disturbance == "random":
            dvec = rng.uniform(-0.5, 0.5, m)
        elif disturbance == "none":
            dvec = np.zeros(m)
        else:
            dvec = np.full(m, float(disturbance))
        prob = _with_dist(prob0, (1.0, np.zeros(0), np.zeros(0), np.zeros(0), dvec))
        p = prob.plant
        blocks = {
            "x": rng.normal(size=m), "v": rng.normal(size=m), "ie": rng.normal(size=m),
            "j_hat": p.J + rng.normal(scale=0.5, size=m), "b_hat": p.B + rng.normal(scale=0.5, size=m),
        }
        s = prob.layout.pack(blocks)
        t = float(rng.uniform(0.0, 30.0))
        fwd = prob.step(t, s, dt)
        bwd = prob.step(t, s, -dt)
        fd = (spr_composite(prob, t + dt, fwd)["theta"] - spr_composite(prob, t - dt, bwd)["theta"]) / (2 * dt)
        cf = theta_rate_closed_form(prob, t, s)
        out[k] = np.max(np.abs(fd - cf)) / max(np.max(np.abs(cf)), 1e-12)
        worst = max(worst, out[k])
    return OracleReport(worst, out)


def _with_graph(prob: KernelProblem, net: Network) -> KernelProblem:
    d = dict(prob.__dict__)
    d.update(network=net, graph=_graph_args(net))
    return KernelProblem(**d)


def _with_dist(prob: KernelProblem, dist: tuple) -> KernelProblem:
    d = dict(prob.__dict__)
    d["dist"] = dist
    return KernelProblem(**d)


# -- benchmark --------------------------------------------------------------

BENCH_TOPOLOGIES = {"star": "star", "cyclic": "cyclic", "path": "series"}
BENCH_CONTROLLERS = ("spr", "scenario1")


@dataclass
class BenchmarkCell:
    m: int
    topology: str
    controller: str
    seconds: list[float] = field(default_factory=list)
    status: str = "ok"
    fail_time: float | None = None

    @property
    def median(self) -> float:
        return float(statistics.median(self.seconds))


@dataclass
class BenchmarkReport:
    cells: list[BenchmarkCell]
    reps: int
    horizon: float
    dt: float

    def median(self, m: int, topology: str, controller: str) -> float:
        for c in self.cells:
            if (c.m, c.topology, c.controller) == (m, topology, controller):
                return c.median
        raise KeyError((m, topology, controller))

    @property
    def ms(self) -> list[int]:
        return sorted({c.m for c in self.cells})

    @property
    def columns(self) -> list[tuple[str, str]]:
        seen = []
        for c in self.cells:
            key = (c.topology, c.controller)
            if key not in seen:
                seen.append(key)
        return seen

    def to_text(self) -> str:
        """Median seconds, one row per ``m`` and one column per (topology, controller)."""
        cols = self.columns
        head = ["m"] + [f"{t}/{c}" for t, c in cols]
        lines = [",".join(head)]
        for m in self.ms:
            lines.append(",".join([str(m)] + [f"{self.median(m, t, c):.6g}" for t, c in cols]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "reps": self.reps, "horizon": self.horizon, "dt": self.dt,
            "cells": [
                {"m": c.m, "topology": c.topology, "controller": c.controller, "median": c.median,
                 "seconds": c.seconds, "status": c.status, "fail_time": c.fail_time}
                for c in self.cells
            ],
        }


def benchmark_config(m: int, topology: str, controller: str, horizon: float = 30.0, dt: float = 1e-3) -> ScenarioConfig:
    return ScenarioConfig.from_dict({
        "name": f"bench-{topology}-{controller}-{m}",
        "topology": {"kind": BENCH_TOPOLOGIES.get(topology, topology), "m": m},
        "controller": {"kind": controller},
        "disturbance": {"kind": "d3"},
        "integrator": {"dt": dt, "horizon": horizon, "stride": max(1, int(round(horizon / dt)))},
    })


def benchmark(ms, topologies=("star", "cyclic", "path"), controllers=BENCH_CONTROLLERS, reps: int = 20,
              horizon: float = 30.0, dt: float = 1e-3, warmup: int = 1) -> BenchmarkReport:
    """Median integration wall-clock per (m, topology, controller) cell.

    Cells run sequentially so timings are taken on an otherwise idle process.
    A diverging cell is timed up to its abort and flagged ``blowup``.
    """
    ms = list(ms)
    if not ms or not topologies or not controllers:
        raise ValueError("benchmark suite must be nonempty")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    cells = []
    for topology in topologies:
        for controller in controllers:
            for m in ms:
                cfg = benchmark_config(m, topology, controller, horizon, dt)
                prob = prepare(cfg)
                n = cfg.integrator.n_steps
                args = (KIND_CODES[prob.kind], prob.s0, dt, n, cfg.integrator.stride, _steady_start(n),
                        cfg.integrator.blowup, prob.graph, prob.plant_args, prob.ctrl, prob.leader, prob.dist)
                cell = BenchmarkCell(m, topology, controller)
                for _ in range(warmup):
                    _kernels.integrate(*args)
                for _ in range(reps):
                    t0 = time.perf_counter()
                    res = _kernels.integrate(*args)
                    cell.seconds.append(time.perf_counter() - t0)
                if res[5] != _kernels.STATUS_OK:
                    cell.status, cell.fail_time = "blowup", float(res[6])
                cells.append(cell)
    return BenchmarkReport(cells, reps, horizon, dt)

