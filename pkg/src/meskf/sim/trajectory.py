"""Ground-truth trajectory generation on a surface.

Chart-space paths (analytic circles or splines through waypoints) are
traversed with a trapezoidal speed profile and sampled at the odometry
step. Body velocities are recovered by inverting the discrete
displacement model exactly, so re-integrating the propagation model
with zero noise reproduces the chart path to floating-point accuracy.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ..core import heading_rotation_2d, wrap_angle
from ..errors import ConfigError, OutOfChartError
from ..surface import BSplineSurface


@dataclass
class TrajectorySpec:
    """Chart path plus timing.

    path is either {"type": "circle", "center": [u, v], "radius": r}
    or {"type": "waypoints", "points": [[u, v], ...]}; a waypoint path
    whose first and last points coincide is treated as a closed loop.
    """
    path: dict
    speed: float             # cruise speed, m/s (chart-space)
    duration: float          # s
    dt: float                # odometry step, s
    ramp_fraction: float = 0.15

    def __post_init__(self):
        if self.speed < 0:
            raise ConfigError("speed must be >= 0", field="trajectory.speed")
        if self.duration <= 0 or self.dt <= 0:
            raise ConfigError("duration and dt must be positive",
                              field="trajectory")


@dataclass
class GroundTruth:
    """Sampled true trajectory and the exact body velocities driving it."""
    times: np.ndarray        # (K+1,)
    chart: np.ndarray        # (K+1, 2)
    gamma: np.ndarray        # (K+1,)
    v_m: np.ndarray          # (K, 2) body velocity over step k -> k+1
    omega: np.ndarray        # (K,)   body rate over step k -> k+1
    dt: float

    @property
    def n_steps(self):
        return len(self.omega)


def _path_function(path: dict):
    """Return (position(s), total_length, closed) for a chart path."""
    kind = path.get("type")
    if kind == "circle":
        center = np.asarray(path["center"], dtype=float)
        radius = float(path["radius"])
        length = 2.0 * np.pi * radius

        def pos(s):
            ang = np.asarray(s, dtype=float) / radius
            return center + radius * np.stack(
                [np.cos(ang), np.sin(ang)], axis=-1)

        return pos, length, True
    if kind == "waypoints":
        pts = np.asarray(path["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ConfigError("waypoints must be an (n, 2) list, n >= 2",
                              field="trajectory.path.points")
        closed = bool(np.allclose(pts[0], pts[-1]))
        if closed:
            pts = pts.copy()
            pts[-1] = pts[0]   # periodic splines need exact closure
        chord = np.concatenate(
            [[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        bc = "periodic" if closed else "natural"
        spline = CubicSpline(chord, pts, bc_type=bc)
        # arc-length table on a fine grid
        sfine = np.linspace(0.0, chord[-1], 64 * len(pts))
        seg = np.linalg.norm(np.diff(spline(sfine), axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        length = arc[-1]

        def pos(s):
            param = np.interp(np.asarray(s, dtype=float), arc, sfine)
            return spline(param)

        return pos, length, closed
    raise ConfigError(f"unknown path type {kind!r}",
                      field="trajectory.path.type")


def _arc_profile(spec: TrajectorySpec, n_steps: int):
    """Trapezoidal arc-length profile s(t_k), k = 0..n_steps."""
    t = np.arange(n_steps + 1) * spec.dt
    ramp = spec.ramp_fraction * spec.duration
    v = np.full_like(t, spec.speed)
    if ramp > 0:
        v = np.minimum(v, spec.speed * t / ramp)
        v = np.minimum(v, spec.speed * np.maximum(spec.duration - t, 0) / ramp)
    v = np.maximum(v, 0.0)
    # trapezoid integration of speed
    s = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * spec.dt)])
    return s


def generate_ground_truth(surface: BSplineSurface,
                          spec: TrajectorySpec) -> GroundTruth:
    pos_fn, length, closed = _path_function(spec.path)
    n_steps = int(round(spec.duration / spec.dt))
    s = _arc_profile(spec, n_steps)
    if closed:
        s = np.mod(s, length)
    else:
        s = np.clip(s, 0.0, length)
    chart = pos_fn(s)
    if not np.all(surface.contains(chart)):
        raise OutOfChartError("trajectory leaves the chart domain")

    # path tangent direction in the tangent plane -> heading
    ds = 1e-4 * max(length, 1.0)
    ahead = pos_fn(np.mod(s + ds, length) if closed
                   else np.clip(s + ds, 0.0, length))
    d_chart = ahead - chart
    grads = surface.gradient_many(chart)
    frames = surface.tangent_frame_many(chart)
    d_world = np.column_stack(
        [d_chart, np.einsum("ij,ij->i", grads, d_chart)])
    w = np.einsum("nji,nj->ni", frames, d_world)   # frame^T d_world
    gamma = np.arctan2(w[:, 1], w[:, 0])

    # exact inversion of the discrete displacement model
    frames2 = frames[:-1, 0:2, 0:2]
    d_step = np.diff(chart, axis=0) / spec.dt
    tangent_v = np.linalg.solve(frames2, d_step[:, :, None])[:, :, 0]
    v_m = np.empty_like(tangent_v)
    for k in range(n_steps):
        v_m[k] = heading_rotation_2d(gamma[k]).T @ tangent_v[k]
    omega = wrap_angle(np.diff(gamma)) / spec.dt
    return GroundTruth(times=np.arange(n_steps + 1) * spec.dt,
                       chart=chart, gamma=gamma, v_m=v_m, omega=omega,
                       dt=spec.dt)
