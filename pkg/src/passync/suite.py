"""Frozen experiment families: each builds scenarios, runs them and checks expected properties."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .config import ScenarioConfig
from .engine import RunResult, benchmark, lyapunov_monitor, simulate
from .errors import NumericalBlowup
from .nonspr import nonspr_certify

TOPOLOGIES = ("star", "cyclic", "series", "arbitrary")
SYNC_TOL = 1e-2
BOUNDED_TOL = 0.1
NONSPR_TOL = 5e-2
ESTIMATE_BOUND = 100.0
LYAPUNOV_STEP_TOL = 1e-8
CYCLIC_SWEEP = (0.95, 0.75, 0.5, 0.15, 0.05)
CYCLIC_SWEEP_RATIO = 10.0
PARTIAL_ACCESS = (1, 2, 3, 4, 5)
PARTIAL_WEIGHT = 0.15
ARBITRARY_SWEEP = (0.05, 0.15, 0.25, 0.5)
REMOVALS = (("I",), ("II",), ("III",), ("I", "II", "III"))
BENCH_MS = (50, 100, 150, 200, 250)
PATH_STAR_RATIO = 3.0
ORDER_RANGE = (8.0, 32.0)


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str


@dataclass
class SuiteSettings:
    dt: float | None = None
    horizon: float | None = None
    reps: int = 20
    stride: int = 10


@dataclass
class FamilyResult:
    name: str
    assertions: list[Assertion] = field(default_factory=list)
    runs: dict[str, RunResult] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, ok: bool, detail: str) -> None:
        self.assertions.append(Assertion(name, bool(ok), detail))


@dataclass(frozen=True)
class ExperimentSuite:
    """Named scenarios plus a function asserting properties over their results."""

    name: str
    description: str
    scenarios: tuple[ScenarioConfig, ...]
    checks: Callable[[FamilyResult], None] | None = None
    custom: Callable[["ExperimentSuite", SuiteSettings, FamilyResult], None] | None = None

    def __post_init__(self):
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate scenario names in suite {self.name!r}")


def scenario(name: str, **sections) -> ScenarioConfig:
    data = {"name": name}
    data.update(sections)
    return ScenarioConfig.from_dict(data)


def _apply(cfg: ScenarioConfig, st: SuiteSettings) -> ScenarioConfig:
    changes = {"integrator.stride": st.stride}
    if st.dt is not None:
        changes["integrator.dt"] = st.dt
    if st.horizon is not None:
        changes["integrator.horizon"] = st.horizon
    return cfg.replace(**changes)


def _steady(run: RunResult | None) -> float:
    return float("inf") if run is None else run.metrics["steady_state_err"]


def _bounded_estimates(run: RunResult) -> float:
    return float(max(np.max(np.abs(run.block("j_hat"))), np.max(np.abs(run.block("b_hat")))))


# -- family definitions -----------------------------------------------------


def _theorem1_checks(fr: FamilyResult) -> None:
    for name, run in fr.runs.items():
        err = _steady(run)
        fr.check(f"{name}: steady error < {SYNC_TOL:g}", err < SYNC_TOL, f"{err:.3e}")
        if run is not None:
            dv = float(np.max(np.diff(lyapunov_monitor(run))))
            fr.check(f"{name}: Lyapunov nonincreasing", dv <= LYAPUNOV_STEP_TOL, f"max step increase {dv:.3e}")


def _fig3_checks(fr: FamilyResult) -> None:
    err = _steady(fr.runs.get("star-d1"))
    fr.check(f"d1 constant rejected (< {SYNC_TOL:g})", err < SYNC_TOL, f"{err:.3e}")
    for d in ("d2", "d3"):
        err = _steady(fr.runs.get(f"star-{d}"))
        fr.check(f"{d} bounded (< {BOUNDED_TOL:g})", err < BOUNDED_TOL, f"{err:.3e}")


def _fig4_checks(fr: FamilyResult) -> None:
    for name, run in fr.runs.items():
        err = _steady(run)
        fr.check(f"{name}: steady error < {BOUNDED_TOL:g}", err < BOUNDED_TOL, f"{err:.3e}")
        if run is not None:
            est = _bounded_estimates(run)
            fr.check(f"{name}: estimates bounded", est < ESTIMATE_BOUND, f"max |J_hat|,|B_hat| = {est:.3g}")


def _fig5a_checks(fr: FamilyResult) -> None:
    low, ref = _steady(fr.runs.get("cyclic-w0.05")), _steady(fr.runs.get("cyclic-w0.5"))
    fr.check(f"w=0.05 error >= {CYCLIC_SWEEP_RATIO:g}x w=0.5 error", low >= CYCLIC_SWEEP_RATIO * ref,
             f"{low:.3e} vs {ref:.3e} (ratio {low / ref if ref > 0 else float('inf'):.3g})")
    for w in CYCLIC_SWEEP:
        if w >= 0.15:
            err = _steady(fr.runs.get(f"cyclic-w{w:g}"))
            fr.check(f"w={w:g} synchronizes (< {SYNC_TOL:g})", err < SYNC_TOL, f"{err:.3e}")


def _sync_all(fr: FamilyResult) -> None:
    for name, run in fr.runs.items():
        err = _steady(run)
        fr.check(f"{name}: synchronizes (< {SYNC_TOL:g})", err < SYNC_TOL, f"{err:.3e}")


def _fig6b_checks(fr: FamilyResult) -> None:
    for name, run in fr.runs.items():
        err = _steady(run)
        l2 = float("inf") if run is None else run.metrics["sync_l2"]
        fr.check(f"{name}: bounded (L2 finite, steady < {BOUNDED_TOL:g})", np.isfinite(l2) and err < BOUNDED_TOL,
                 f"L2 {l2:.3g}, steady {err:.3e}")


def _fig7_checks(which: str):
    def check(fr: FamilyResult) -> None:
        for name, run in fr.runs.items():
            err = _steady(run)
            fr.check(f"{name}: steady error < {NONSPR_TOL:g}", err < NONSPR_TOL, f"{err:.3e}")
        cfg = next(iter(fr.runs.values())).config if fr.runs else None
        if cfg is not None:
            rep = nonspr_certify(cfg.plant_params(), cfg.compensator(), which)
            fr.check(f"{which} map certified", rep.verdict, "; ".join(rep.reasons) or "all agents pass")
            un = nonspr_certify(cfg.plant_params(), cfg.compensator(), "unshaped")
            fr.check("unshaped map rejected for relative degree 2",
                     (not un.verdict) and "relative degree 2" in un.reasons, "; ".join(un.reasons[:1]))
    return check


def _table2(suite: ExperimentSuite, st: SuiteSettings, fr: FamilyResult) -> None:
    horizon = st.horizon if st.horizon is not None else 30.0
    dt = st.dt if st.dt is not None else 1e-3
    rep = benchmark(BENCH_MS, reps=st.reps, horizon=horizon, dt=dt)
    fr.extra["benchmark"] = rep
    for topo, ctrl in rep.columns:
        meds = [rep.median(m, topo, ctrl) for m in rep.ms]
        ok = all(b >= a for a, b in zip(meds, meds[1:]))
        fr.check(f"{topo}/{ctrl}: medians nondecreasing in m", ok, ", ".join(f"{x:.4g}" for x in meds))
    for ctrl in ("spr", "scenario1"):
        star, path = rep.median(BENCH_MS[-1], "star", ctrl), rep.median(BENCH_MS[-1], "path", ctrl)
        fr.check(f"{ctrl}: path >= {PATH_STAR_RATIO:g}x star at m={BENCH_MS[-1]}", path >= PATH_STAR_RATIO * star,
                 f"path {path:.4g} s, star {star:.4g} s, ratio {path / star:.3g}")


def order_ratio(dt: float, horizon: float) -> float:
    """``|x(dt) - x(dt/2)| / |x(dt/2) - x(dt/4)|`` of the final state on a smooth star run."""
    finals = []
    for h in (dt, dt / 2, dt / 4):
        cfg = scenario("order", integrator={"dt": h, "horizon": horizon, "stride": 10**9})
        finals.append(simulate(cfg).states[-1])
    a, b, c = finals
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b - c)))


def _order(suite: ExperimentSuite, st: SuiteSettings, fr: FamilyResult) -> None:
    dt = st.dt if st.dt is not None else 1e-3
    horizon = st.horizon if st.horizon is not None else 30.0
    try:
        ratio = order_ratio(dt, horizon)
    except NumericalBlowup as exc:
        fr.check("RK4 order ratio in [8, 32]", False, str(exc))
        return
    lo, hi = ORDER_RANGE
    fr.extra["order_ratio"] = ratio
    fr.check(f"RK4 order ratio in [{lo:g}, {hi:g}]", lo <= ratio <= hi, f"ratio {ratio:.3f} at dt={dt:g}")


def paper_families() -> list[ExperimentSuite]:
    fams = [
        ExperimentSuite(
            "theorem1", "disturbance-free synchronization and Lyapunov decrease on all topologies",
            tuple(scenario(f"{t}-clean", topology={"kind": t, "m": 8}) for t in TOPOLOGIES), _theorem1_checks,
        ),
        ExperimentSuite(
            "fig3", "agent 8 on the star graph under the three disturbances",
            tuple(scenario(f"star-{d}", disturbance={"kind": d}) for d in ("d1", "d2", "d3")), _fig3_checks,
        ),
        ExperimentSuite(
            "fig4", "all four topologies under d3",
            tuple(scenario(f"{t}-d3", topology={"kind": t, "m": 8}, disturbance={"kind": "d3"}) for t in TOPOLOGIES),
            _fig4_checks,
        ),
        ExperimentSuite(
            "fig5a", "cyclic leader-weight sweep",
            tuple(scenario(f"cyclic-w{w:g}", topology={"kind": "cyclic", "m": 8, "leader_weight": w}) for w in CYCLIC_SWEEP),
            _fig5a_checks,
        ),
        ExperimentSuite(
            "fig5b", "cyclic graph with the leader reaching only the first i^c agents",
            tuple(
                scenario(f"cyclic-access{k}", topology={"kind": "cyclic", "m": 8, "leader_weight": PARTIAL_WEIGHT,
                                                         "leader_access": list(range(1, k + 1))})
                for k in PARTIAL_ACCESS
            ),
            _sync_all,
        ),
        ExperimentSuite(
            "fig6a", "arbitrary graph, agent-2 leader weight sweep",
            tuple(scenario(f"arbitrary-w20-{w:g}", topology={"kind": "arbitrary", "m": 8, "leader_weight": w})
                  for w in ARBITRARY_SWEEP),
            _sync_all,
        ),
        ExperimentSuite(
            "fig6b", "arbitrary graph with link groups removed after normalization, under d3",
            tuple(scenario(f"arbitrary-minus-{'-'.join(g)}", topology={"kind": "arbitrary", "m": 8, "removed_groups": list(g)},
                           disturbance={"kind": "d3"}) for g in REMOVALS),
            _fig6b_checks,
        ),
        ExperimentSuite(
            "fig7a", "output-shaped controller (scenario 1) under d3",
            tuple(scenario(f"{t}-s1-d3", topology={"kind": t, "m": 8}, controller={"kind": "scenario1"},
                           disturbance={"kind": "d3"}) for t in TOPOLOGIES),
            _fig7_checks("scenario1"),
        ),
        ExperimentSuite(
            "fig7b", "position-only controller (scenario 2) under d3",
            tuple(scenario(f"{t}-s2-d3", topology={"kind": t, "m": 8}, controller={"kind": "scenario2"},
                           disturbance={"kind": "d3"}) for t in TOPOLOGIES),
            _fig7_checks("scenario2"),
        ),
        ExperimentSuite("table2", "runtime scaling benchmark", (), custom=_table2),
        ExperimentSuite("order", "RK4 convergence order on a smooth run", (), custom=_order),
    ]
    return fams


def select(families: list[ExperimentSuite], pattern: str | None) -> list[ExperimentSuite]:
    """Families whose name starts with ``pattern`` (comma-separated alternatives allowed)."""
    if not pattern:
        return families
    keys = [p.strip() for p in pattern.split(",") if p.strip()]
    return [f for f in families if any(f.name.startswith(k) for k in keys)]


def run_family(fam: ExperimentSuite, st: SuiteSettings) -> FamilyResult:
    fr = FamilyResult(fam.name)
    if fam.custom is not None:
        fam.custom(fam, st, fr)
        return fr
    for cfg in fam.scenarios:
        cfg = _apply(cfg, st)
        try:
            fr.runs[cfg.name] = simulate(cfg)
        except NumericalBlowup as exc:
            fr.runs[cfg.name] = None
            fr.check(f"{cfg.name}: no blowup", False, str(exc))
    if fam.checks is not None:
        # Checks see only completed runs; blowups are already recorded as failures.
        finished = {k: v for k, v in fr.runs.items() if v is not None}
        fam.checks(FamilyResult(fr.name, fr.assertions, finished, fr.extra))
    return fr


def write_family(fr: FamilyResult, out: Path) -> None:
    d = out / fr.name
    d.mkdir(parents=True, exist_ok=True)
    for name, run in fr.runs.items():
        if run is None:
            continue
        (d / f"{name}.csv").write_text(run.to_csv(), encoding="utf-8")
        (d / f"{name}_plot.csv").write_text(run.plot_data(f"{name}_plot.csv"), encoding="utf-8")
        (d / f"{name}_metrics.yaml").write_text(run.metrics_text(), encoding="utf-8")
    if "benchmark" in fr.extra:
        rep = fr.extra["benchmark"]
        (d / "table.csv").write_text(rep.to_text(), encoding="utf-8")
        (d / "benchmark.yaml").write_text(yaml.safe_dump(rep.to_dict(), sort_keys=False), encoding="utf-8")


def report(results: list[FamilyResult]) -> dict:
    return {
        "passed": all(r.passed for r in results),
        "families": [
            {"name": r.name, "passed": r.passed,
             "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail} for a in r.assertions]}
            for r in results
        ],
    }
