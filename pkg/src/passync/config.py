"""Scenario configuration: one YAML document describes one simulation.

Per-agent vectors accept a scalar (broadcast), a list of length ``m``, or the
string ``"paper"`` where a built-in per-agent reference formula exists.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import ConfigInvalid
from .graph import Network, TopologyPreset, build_preset, normalize, PRESET_KINDS
from .nonspr import CompensatorParams
from .plant import PlantParams, paper_params
from .signals import DisturbanceProfile, LeaderSignal, LEADER_KINDS, DISTURBANCE_KINDS
from .spr import SprGains

CONTROLLER_KINDS = ("spr", "scenario1", "scenario2")

Vector = Any  # float | list[float] | "paper"


def resolve_vector(value: Vector, m: int, name: str, paper=None) -> np.ndarray:
    if isinstance(value, str):
        if value != "paper" or paper is None:
            raise ConfigInvalid(f"{name}: unsupported value {value!r}")
        return np.asarray(paper(m), dtype=float)
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(m, float(arr[0]))
    if arr.size != m:
        raise ConfigInvalid(f"{name}: expected {m} entries, got {arr.size}")
    return arr


def _paper_phi(m):
    return 1.5 + 0.5 * np.arange(1, m + 1)


@dataclass
class TopologyConfig:
    kind: str = "star"
    m: int = 8
    leader_weight: float | None = None
    leader_access: list[int] | None = None
    removed_groups: list[str] = field(default_factory=list)
    normalize: bool = True
    custom: dict | None = None


@dataclass
class PlantConfig:
    J: Vector = "paper"
    B: Vector = "paper"
    x_init: Vector = 0.0
    v_init: Vector = 0.0


@dataclass
class ControllerConfig:
    kind: str = "spr"
    phi: Vector = "paper"
    lam: Vector = 1.0
    gamma1: Vector = 5.0
    gamma2: Vector = 5.0
    gamma3: Vector = 5.0
    p: Vector = 5.0
    q: Vector = 10.0
    theta: Vector = 2.0
    theta0: float | None = None
    k_star: Vector = 80.0
    j_hat_init: Vector = 0.0
    b_hat_init: Vector = 0.0
    k_hat_init: Vector | None = None


@dataclass
class SignalConfig:
    kind: str = "paper"
    value: float = 0.0
    terms: list[list[float]] = field(default_factory=list)
    scale: list[float] | None = None


@dataclass
class IntegratorConfig:
    dt: float = 1e-3
    horizon: float = 30.0
    method: str = "rk4"
    stride: int = 10
    blowup: float = 1e9

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class OutputConfig:
    dir: str | None = None
    prefix: str = "run"


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    leader: SignalConfig = field(default_factory=SignalConfig)
    disturbance: SignalConfig = field(default_factory=lambda: SignalConfig(kind="none"))
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    # -- construction ---------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioConfig":
        if not isinstance(data, Mapping):
            raise ConfigInvalid("scenario document must be a mapping")
        sections = {
            "topology": TopologyConfig, "plant": PlantConfig, "controller": ControllerConfig,
            "leader": SignalConfig, "disturbance": SignalConfig, "integrator": IntegratorConfig,
            "outputs": OutputConfig,
        }
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key == "name":
                kwargs["name"] = str(value)
            elif key in sections:
                kwargs[key] = _section(sections[key], key, value)
            else:
                raise ConfigInvalid(f"unknown top-level key {key!r}")
        cfg = cls(**kwargs)
        if "disturbance" not in data:
            cfg.disturbance = SignalConfig(kind="none")
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "ScenarioConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"malformed YAML: {exc}") from exc
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_yaml(text)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def replace(self, **changes) -> "ScenarioConfig":
        """Deep-copied variant with dotted-path overrides, e.g. ``{"integrator.dt": 1e-4}``."""
        data = copy.deepcopy(self.to_dict())
        for path, value in changes.items():
            node = data
            parts = path.replace("__", ".").split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        return ScenarioConfig.from_dict(data)

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        t = self.topology
        if t.kind not in PRESET_KINDS:
            raise ConfigInvalid(f"topology.kind must be one of {PRESET_KINDS}, got {t.kind!r}")
        if t.kind != "custom" and (not isinstance(t.m, int) or t.m < 1):
            raise ConfigInvalid(f"topology.m must be a positive integer, got {t.m!r}")
        if self.controller.kind not in CONTROLLER_KINDS:
            raise ConfigInvalid(f"controller.kind must be one of {CONTROLLER_KINDS}")
        if self.leader.kind not in LEADER_KINDS:
            raise ConfigInvalid(f"leader.kind must be one of {LEADER_KINDS}")
        if self.disturbance.kind not in DISTURBANCE_KINDS:
            raise ConfigInvalid(f"disturbance.kind must be one of {DISTURBANCE_KINDS}")
        ig = self.integrator
        if ig.method != "rk4":
            raise ConfigInvalid("integrator.method must be 'rk4'")
        if not (ig.dt > 0 and ig.horizon >= ig.dt):
            raise ConfigInvalid("integrator needs dt > 0 and horizon >= dt")
        if not (isinstance(ig.stride, int) and ig.stride >= 1):
            raise ConfigInvalid("integrator.stride must be a positive integer")
        # Resolving every derived object surfaces all remaining schema errors.
        try:
            net = self.network()
            m = net.m
            self.plant_params()
            self.initial_plant()
            if self.controller.kind == "spr":
                self.spr_gains()
            else:
                self.compensator()
            self.leader_signal()
            self.disturbance_profile().scale_vector(m)
        except ConfigInvalid:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigInvalid(str(exc)) from exc

    # -- derived objects ------------------------------------------------

    @property
    def m(self) -> int:
        return self.network().m

    def preset(self) -> TopologyPreset:
        t = self.topology
        custom = Network.from_dict(t.custom) if t.custom is not None else None
        return TopologyPreset(
            kind=t.kind, m=t.m if custom is None else custom.m,
            leader_weight_override=t.leader_weight,
            leader_access=tuple(t.leader_access) if t.leader_access is not None else None,
            custom=custom,
        )

    def network(self) -> Network:
        """Preset, normalized, then with any removed link groups dropped (no re-normalization)."""
        net = build_preset(self.preset())
        if self.topology.normalize:
            net = normalize(net)
        if self.topology.removed_groups:
            net = net.without_groups(self.topology.removed_groups)
        return net

    def plant_params(self) -> PlantParams:
        m = self.topology.m if self.topology.custom is None else self.topology.custom["m"]
        paper = paper_params(m)
        J = resolve_vector(self.plant.J, m, "plant.J", lambda k: paper.J)
        B = resolve_vector(self.plant.B, m, "plant.B", lambda k: paper.B)
        try:
            return PlantParams(J, B)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def initial_plant(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.plant_params().m
        return resolve_vector(self.plant.x_init, m, "plant.x_init"), resolve_vector(self.plant.v_init, m, "plant.v_init")

    def spr_gains(self) -> SprGains:
        c, m = self.controller, self.plant_params().m
        try:
            return SprGains(
                resolve_vector(c.phi, m, "controller.phi", _paper_phi),
                resolve_vector(c.lam, m, "controller.lam"),
                resolve_vector(c.gamma1, m, "controller.gamma1"),
                resolve_vector(c.gamma2, m, "controller.gamma2"),
            )
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def compensator(self) -> CompensatorParams:
        c, m = self.controller, self.plant_params().m
        theta = resolve_vector(c.theta, m, "controller.theta")
        theta0 = float(theta[0]) if c.theta0 is None else float(c.theta0)
        try:
            return CompensatorParams(
                phi=resolve_vector(c.phi, m, "controller.phi", _paper_phi),
                p=resolve_vector(c.p, m, "controller.p"),
                q=resolve_vector(c.q, m, "controller.q"),
                theta=theta, theta0=theta0,
                k_star=resolve_vector(c.k_star, m, "controller.k_star"),
                gamma1=resolve_vector(c.gamma1, m, "controller.gamma1"),
                gamma2=resolve_vector(c.gamma2, m, "controller.gamma2"),
                gamma3=resolve_vector(c.gamma3, m, "controller.gamma3"),
            )
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def leader_signal(self) -> LeaderSignal:
        s = self.leader
        return LeaderSignal(kind=s.kind, value=s.value, terms=tuple(map(tuple, s.terms)))

    def disturbance_profile(self) -> DisturbanceProfile:
        s = self.disturbance
        return DisturbanceProfile(
            kind=s.kind, scale=tuple(s.scale) if s.scale is not None else None,
            value=s.value, terms=tuple(map(tuple, s.terms)),
        )


def _section(cls, key, value):
    if value is None:
        return cls()
    if not isinstance(value, Mapping):
        raise ConfigInvalid(f"section {key!r} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(value) - names
    if unknown:
        raise ConfigInvalid(f"unknown keys in {key!r}: {sorted(unknown)}")
    try:
        obj = cls(**value)
    except TypeError as exc:
        raise ConfigInvalid(f"bad section {key!r}: {exc}") from exc
    if key == "topology" and isinstance(obj.m, float) and obj.m.is_integer():
        obj.m = int(obj.m)
    if key == "integrator":
        try:
            obj.dt, obj.horizon, obj.blowup = float(obj.dt), float(obj.horizon), float(obj.blowup)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad integrator settings: {exc}") from exc
    return obj


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into YAML-safe builtins."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
