import numpy as np
import pytest

from passync import ScenarioConfig
from passync.errors import ConfigInvalid


def test_defaults_resolve():
    cfg = ScenarioConfig.from_dict({})
    assert cfg.m == 8 and cfg.controller.kind == "spr" and cfg.disturbance.kind == "none"
    np.testing.assert_allclose(cfg.spr_gains().phi, 1.5 + 0.5 * np.arange(1, 9))


def test_yaml_round_trip():
    cfg = ScenarioConfig.from_dict({
        "name": "rt",
        "topology": {"kind": "arbitrary", "leader_weight": 0.15, "removed_groups": ["I"]},
        "controller": {"kind": "scenario2", "theta": [2.0] * 8},
        "disturbance": {"kind": "d3", "scale": [1.0] * 8},
        "integrator": {"dt": 5e-4, "horizon": 3.0},
    })
    back = ScenarioConfig.from_yaml(cfg.to_yaml())
    assert back == cfg
    assert back.network() == cfg.network()


def test_replace_dotted_paths():
    cfg = ScenarioConfig.from_dict({})
    new = cfg.replace(**{"integrator.dt": 1e-4, "topology.kind": "cyclic"})
    assert new.integrator.dt == 1e-4 and new.topology.kind == "cyclic"
    assert cfg.integrator.dt == 1e-3


def test_removal_happens_after_normalization():
    net = ScenarioConfig.from_dict({"topology": {"kind": "arbitrary", "removed_groups": ["I", "II", "III"]}}).network()
    assert net.balance_residual > 0.1


@pytest.mark.parametrize("doc", [
    {"topology": {"kind": "ring"}},
    {"topology": {"m": 0}},
    {"topology": {"kind": "arbitrary", "m": 7}},
    {"controller": {"phi": 0.0}},
    {"controller": {"kind": "pid"}},
    {"controller": {"kind": "scenario1", "p": 20.0}},
    {"controller": {"kind": "scenario1", "theta": 0.0}},
    {"plant": {"J": [1.0, 2.0]}},
    {"plant": {"J": -1.0}},
    {"integrator": {"dt": 0.0}},
    {"integrator": {"method": "euler"}},
    {"integrator": {"stride": 0}},
    {"disturbance": {"kind": "d1", "scale": [1.0, 2.0]}},
    {"leader": {"kind": "square"}},
    {"bogus": 1},
    {"controller": {"gain": 3}},
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigInvalid):
        ScenarioConfig.from_dict(doc)


def test_malformed_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigInvalid):
        ScenarioConfig.from_yaml("topology: [unclosed")
    with pytest.raises(ConfigInvalid):
        ScenarioConfig.load(tmp_path / "missing.yaml")
    with pytest.raises(ConfigInvalid):
        ScenarioConfig.from_yaml("- a list")
