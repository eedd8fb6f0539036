"""Scenario configuration parsing and validation."""
import numpy as np
import pytest

from meskf import ConfigError
from meskf.sim.config import scenario_from_dict


def minimal(**over):
    cfg = {
        "surface": {
            "degree_u": 1, "degree_v": 1,
            "knots_u": [-5.0, -5.0, 5.0, 5.0],
            "knots_v": [-5.0, -5.0, 5.0, 5.0],
            "control_points": [[0.0, 0.0], [0.0, 0.0]],
        },
        "trajectory": {"path": {"type": "circle", "center": [0, 0],
                                "radius": 2.0},
                       "speed": 0.5, "duration": 4.0, "dt": 0.05},
    }
    cfg.update(over)
    return cfg


def test_minimal_scenario_defaults():
    s = scenario_from_dict(minimal())
    assert s.filter_kind == "M-ESEKF"
    assert s.n_trials == 1
    assert s.seed == 0
    assert s.schedule.segments[0].start == 0.0


def test_missing_surface_rejected():
    with pytest.raises(ConfigError):
        scenario_from_dict({"trajectory": {}})


def test_bad_filter_rejected():
    with pytest.raises(ConfigError):
        scenario_from_dict(minimal(filter="UKF"))


def test_bad_schedule_rejected():
    cfg = minimal(schedule=[{"start": 0.0, "end": 2.0, "sensors": ["pose"]}])
    with pytest.raises(ConfigError):
        scenario_from_dict(cfg)   # does not cover the duration


def test_bad_trials_rejected():
    with pytest.raises(ConfigError):
        scenario_from_dict(minimal(trials=0))


def test_extrinsics_parsed():
    cfg = minimal(extrinsics={"r_RS": [0.1, 0.0, 0.2]})
    s = scenario_from_dict(cfg)
    np.testing.assert_allclose(s.extrinsics.r_RS, [0.1, 0.0, 0.2])
    np.testing.assert_allclose(s.extrinsics.q_RS, [1, 0, 0, 0])


def test_unknown_sampling_key_rejected():
    with pytest.raises(ConfigError):
        scenario_from_dict(minimal(sampling={"grid_size": 5}))
