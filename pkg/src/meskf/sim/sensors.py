"""Synthetic sensor streams from ground truth.

Noise comes from counter-based Philox generators keyed by
(seed, trial, sensor id), so streams are bitwise reproducible and
independent of evaluation order. Sensor samples are generated for the
whole duration and then filtered by the schedule, which keeps a given
sensor's noise sequence independent of which segments enable it.

Orientation noise is generated as Tait-Bryan angles and converted to
quaternions.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import quat
from ..core import FilterState, OdometryInput, RobotExtrinsics
from ..errors import ConfigError
from ..sensors3d import PoseMeasurement, RangeMeasurement, predict_pose
from ..surface import BSplineSurface
from .trajectory import GroundTruth

_SENSOR_IDS = {"odometry": 0, "pose": 1, "range": 2, "init": 3}


@dataclass
class SensorSuite:
    """Sensor rates and noise levels of the simulated platform."""
    odometry_rate: float = 20.0          # Hz
    odometry_linear_std: float = 0.02    # m/s
    odometry_angular_std: float = 0.01   # rad/s
    pose_rate: float = 5.0               # Hz
    pose_position_std: float = 0.03      # m
    pose_orientation_std: float = 0.01   # rad
    range_rate: float = 10.0             # Hz
    range_distance_std: float = 0.05     # m
    anchors: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        if any(r <= 0 for r in (self.odometry_rate, self.pose_rate,
                                self.range_rate)):
            raise ConfigError("sensor rates must be positive",
                              field="sensors")


@dataclass
class ScheduleSegment:
    start: float
    end: float
    sensors: frozenset

    def __post_init__(self):
        self.sensors = frozenset(self.sensors) | {"odometry"}


@dataclass
class SensorSchedule:
    """Contiguous, non-overlapping segments covering the full duration."""
    segments: list

    def validate(self, duration: float):
        if not self.segments:
            raise ConfigError("schedule has no segments", field="schedule")
        t = 0.0
        for i, seg in enumerate(self.segments):
            if abs(seg.start - t) > 1e-9:
                raise ConfigError("segments must be contiguous from 0",
                                  field=f"schedule[{i}]")
            if seg.end <= seg.start:
                raise ConfigError("segment end must exceed start",
                                  field=f"schedule[{i}]")
            unknown = seg.sensors - {"odometry", "pose", "range"}
            if unknown:
                raise ConfigError(f"unknown sensors {sorted(unknown)}",
                                  field=f"schedule[{i}]")
            t = seg.end
        if t < duration - 1e-9:
            raise ConfigError("schedule does not cover the duration",
                              field="schedule")

    def enabled(self, sensor: str, time: float) -> bool:
        for seg in self.segments:
            if seg.start <= time < seg.end or (time >= seg.end
                                               and seg is self.segments[-1]):
                return sensor in seg.sensors
        return False

    @staticmethod
    def always_on(duration: float, sensors=("pose", "range")):
        return SensorSchedule(
            [ScheduleSegment(0.0, duration, frozenset(sensors))])


@dataclass
class MeasurementStreams:
    """Timestamped sensor events of a single trial, keyed by truth step."""
    odometry: list                        # OdometryInput per step
    pose_events: dict                     # step index -> PoseMeasurement
    range_events: dict                    # step index -> [RangeMeasurement]
    initial_state_noise: np.ndarray       # (6,) standard-normal draws


def _rng(seed: int, trial: int, sensor: str) -> np.random.Generator:
    key = np.array([np.uint64(seed),
                    (np.uint64(trial) << np.uint64(8))
                    | np.uint64(_SENSOR_IDS[sensor])], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def synthesize_measurements(surface: BSplineSurface, truth: GroundTruth,
                            suite: SensorSuite, schedule: SensorSchedule,
                            extrinsics: RobotExtrinsics, seed: int,
                            trial: int = 0) -> MeasurementStreams:
    duration = truth.times[-1]
    schedule.validate(duration)
    if abs(suite.odometry_rate * truth.dt - 1.0) > 1e-9:
        raise ConfigError("odometry rate must equal 1/dt of the trajectory",
                          field="sensors.odometry_rate")

    # odometry: every truth step
    rng = _rng(seed, trial, "odometry")
    n = truth.n_steps
    noise_v = rng.normal(0.0, suite.odometry_linear_std, size=(n, 2))
    noise_w = rng.normal(0.0, suite.odometry_angular_std, size=n)
    sigma_v = np.eye(2) * suite.odometry_linear_std ** 2
    sigma_w = suite.odometry_angular_std ** 2
    odometry = [OdometryInput(truth.v_m[k] + noise_v[k],
                              truth.omega[k] + noise_w[k],
                              sigma_v, sigma_w)
                for k in range(n)]

    # pose: sampled on its own grid, mapped to truth steps
    rng = _rng(seed, trial, "pose")
    pose_every = int(round(suite.odometry_rate / suite.pose_rate))
    if abs(pose_every * suite.pose_rate - suite.odometry_rate) > 1e-9:
        raise ConfigError("pose rate must divide the odometry rate",
                          field="sensors.pose_rate")
    P_m = np.diag([suite.pose_position_std ** 2] * 3
                  + [suite.pose_orientation_std ** 2] * 3)
    pose_events = {}
    for k in range(pose_every, n + 1, pose_every):
        pos_noise = rng.normal(0.0, suite.pose_position_std, size=3)
        ang = rng.normal(0.0, suite.pose_orientation_std, size=3)
        if not schedule.enabled("pose", truth.times[k]):
            continue
        state = FilterState(truth.chart[k], truth.gamma[k], np.eye(3))
        pos, q = predict_pose(surface, state, extrinsics)
        q_noise = quat.from_tait_bryan(ang[0], ang[1], ang[2])
        z_q = quat.canonicalize(quat.multiply(q, q_noise))
        pose_events[k] = PoseMeasurement(pos + pos_noise, z_q, P_m)

    # range: round-robin over anchors on its own grid
    rng = _rng(seed, trial, "range")
    range_every = int(round(suite.odometry_rate / suite.range_rate))
    if abs(range_every * suite.range_rate - suite.odometry_rate) > 1e-9:
        raise ConfigError("range rate must divide the odometry rate",
                          field="sensors.range_rate")
    range_events = {}
    anchor_idx = 0
    n_anchors = len(suite.anchors)
    for k in range(range_every, n + 1, range_every):
        noise = rng.normal(0.0, suite.range_distance_std)
        if n_anchors == 0:
            continue
        anchor = suite.anchors[anchor_idx % n_anchors]
        anchor_idx += 1
        if not schedule.enabled("range", truth.times[k]):
            continue
        state = FilterState(truth.chart[k], truth.gamma[k], np.eye(3))
        pos, _ = predict_pose(surface, state, extrinsics)
        d_true = np.linalg.norm(pos - anchor)
        range_events.setdefault(k, []).append(
            RangeMeasurement(anchor, max(d_true + noise, 0.0),
                             max(suite.range_distance_std ** 2, 1e-12)))

    init_noise = _rng(seed, trial, "init").normal(size=6)
    return MeasurementStreams(odometry, pose_events, range_events, init_noise)
