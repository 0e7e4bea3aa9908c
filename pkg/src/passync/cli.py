"""Command-line entry points.

Exit codes: 0 success, 1 suite assertion failed, 2 invalid configuration,
3 numerical blowup, 4 certification failed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import yaml

from .config import ScenarioConfig
from .engine import benchmark, simulate
from .errors import ConfigInvalid, NumericalBlowup
from .nonspr import CERTIFY_KINDS, nonspr_certify
from .spr import spr_certify_frequency
from . import suite as suite_mod

EXIT_OK = 0
EXIT_SUITE_FAILED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_UNCERTIFIED = 4

DEFAULT_OUT = "passync_out"


def out_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get("PASSYNC_OUT_DIR") or DEFAULT_OUT)


def _load(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigInvalid("--config is required")
    cfg = ScenarioConfig.load(args.config)
    changes = {}
    if getattr(args, "dt", None) is not None:
        changes["integrator.dt"] = args.dt
    if getattr(args, "horizon", None) is not None:
        changes["integrator.horizon"] = args.horizon
    return cfg.replace(**changes) if changes else cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_simulate(args) -> int:
    try:
        cfg = _load(args)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = out_root(args.out or cfg.outputs.dir)
    prefix = cfg.outputs.prefix
    try:
        run = simulate(cfg)
    except NumericalBlowup as exc:
        _write(out / f"{prefix}_metrics.yaml", yaml.safe_dump(
            {"name": cfg.name, "status": "blowup", "fail_time": exc.time, "threshold": exc.threshold}, sort_keys=False))
        print(f"numerical blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write(out / f"{prefix}_trajectory.csv", run.to_csv())
    _write(out / f"{prefix}_metrics.yaml", "status: ok\n" + run.metrics_text())
    _write(out / f"{prefix}_plot.csv", run.plot_data(f"{prefix}_plot.csv"))
    print(f"steady_state_err {run.metrics['steady_state_err']:.6g}  sync_l2 {run.metrics['sync_l2']:.6g}  -> {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        cfg = _load(args)
        plant = cfg.plant_params()
        if args.map is None and cfg.controller.kind == "spr":
            rep = spr_certify_frequency(plant, cfg.spr_gains())
        else:
            which = args.map or cfg.controller.kind
            rep = nonspr_certify(plant, cfg.compensator(), which)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(yaml.safe_dump(rep.to_dict(), sort_keys=False), end="")
    if not rep.verdict:
        for r in rep.reasons:
            print(f"not certified: {r}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_paper_suite(args) -> int:
    settings = suite_mod.SuiteSettings(dt=args.dt, horizon=args.horizon, reps=args.reps)
    fams = suite_mod.select(suite_mod.paper_families(), args.filter)
    if not fams:
        print(f"no family matches filter {args.filter!r}", file=sys.stderr)
        return EXIT_CONFIG
    out = out_root(args.out)
    results = []
    for fam in fams:
        fr = suite_mod.run_family(fam, settings)
        suite_mod.write_family(fr, out)
        results.append(fr)
        for a in fr.assertions:
            print(f"[{'PASS' if a.passed else 'FAIL'}] {fam.name}: {a.name} ({a.detail})")
    rep = suite_mod.report(results)
    _write(out / "suite_report.yaml", yaml.safe_dump(rep, sort_keys=False))
    print(f"{sum(r.passed for r in results)}/{len(results)} families passed -> {out}")
    return EXIT_OK if rep["passed"] else EXIT_SUITE_FAILED


def cmd_benchmark(args) -> int:
    if not args.m:
        print("benchmark needs at least one m value", file=sys.stderr)
        return EXIT_CONFIG
    if args.reps < 1:
        print("--reps must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    rep = benchmark(args.m, topologies=args.topologies, controllers=args.controllers, reps=args.reps,
                    horizon=args.horizon if args.horizon is not None else 30.0,
                    dt=args.dt if args.dt is not None else 1e-3)
    out = out_root(args.out)
    _write(out / "benchmark.csv", rep.to_text())
    _write(out / "benchmark.yaml", yaml.safe_dump(rep.to_dict(), sort_keys=False))
    print(rep.to_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="passync", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="scenario YAML file")
        p.add_argument("--out", help="output directory (default: $PASSYNC_OUT_DIR or ./passync_out)")
        p.add_argument("--dt", type=float, help="override integration step")
        p.add_argument("--horizon", type=float, help="override simulation horizon")
        p.add_argument("--seed", type=int, help="reserved; runs are deterministic")

    p = sub.add_parser("simulate", help="run one scenario")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="offline passivity certification of a scenario's loop maps")
    p.add_argument("--config", help="scenario YAML file")
    p.add_argument("--map", choices=CERTIFY_KINDS, help="certify a compensated map instead of the configured controller")
    p.set_defaults(func=cmd_certify, dt=None, horizon=None)

    p = sub.add_parser("paper-suite", help="run the frozen experiment families and check their assertions")
    common(p, config=False)
    p.add_argument("--filter", help="family name prefix(es), comma separated, e.g. fig5")
    p.add_argument("--reps", type=int, default=20, help="benchmark repetitions")
    p.set_defaults(func=cmd_paper_suite)

    p = sub.add_parser("benchmark", help="median wall-clock scaling table")
    common(p, config=False)
    p.add_argument("--m", type=int, nargs="*", default=list(suite_mod.BENCH_MS), help="follower counts")
    p.add_argument("--topologies", nargs="+", default=["star", "cyclic", "path"])
    p.add_argument("--controllers", nargs="+", default=["spr", "scenario1"])
    p.add_argument("--reps", type=int, default=20)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
