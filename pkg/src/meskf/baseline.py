"""Constrained full-3D error-state EKF used as the comparison filter.

Tracks position and attitude on SE(3) with a 6-dof error state
(dp, dtheta) and keeps the estimate near the surface with
pseudo-measurements fixing elevation, roll, and pitch at tuned noise
levels. The planar odometry input is lifted to 3-D body velocity
(v, 0) and body rate (0, 0, omega).
"""

from dataclasses import dataclass

import numpy as np

from . import quat
from .core import (FD_STEP, OdometryInput, RobotExtrinsics, joseph_update,
                   wrap_angle)
from .errors import DegenerateGeometryError, SingularUpdateError
from .sensors3d import PoseMeasurement, RangeMeasurement
from .surface import BSplineSurface


def _skew(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


@dataclass
class FullPoseState:
    p: np.ndarray            # world position (3,)
    q: np.ndarray            # body-to-world unit quaternion, wxyz
    P: np.ndarray            # 6x6 covariance over (dp, dtheta)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).copy()
        self.q = quat.normalize(self.q)
        self.P = np.asarray(self.P, dtype=float).copy()

    def copy(self) -> "FullPoseState":
        return FullPoseState(self.p, self.q, self.P)


@dataclass
class PseudoMeasurementConfig:
    sigma_z: float = 0.01    # elevation pseudo-noise std, m
    sigma_rp: float = 0.01   # roll/pitch pseudo-noise std, rad
    rate: float = 20.0       # application frequency, Hz

    def __post_init__(self):
        if self.sigma_z <= 0 or self.sigma_rp <= 0 or self.rate <= 0:
            raise ValueError("pseudo-measurement parameters must be > 0")


def propagate_3d(state: FullPoseState, odom: OdometryInput,
                 dt: float) -> FullPoseState:
    """Lifted planar odometry step with analytic 6x6 error propagation.

    Attitude error is body-frame (local) perturbation: R = R_hat Exp(dtheta).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    R = quat.to_matrix(state.q)
    v = np.array([odom.v_m[0], odom.v_m[1], 0.0])
    w = np.array([0.0, 0.0, odom.omega_m])
    p_new = state.p + R @ v * dt
    q_new = quat.normalize(quat.multiply(state.q, quat.from_rotvec(w * dt)))

    F = np.eye(6)
    F[0:3, 3:6] = -R @ _skew(v) * dt
    F[3:6, 3:6] = quat.to_matrix(quat.from_rotvec(-w * dt))
    G = np.zeros((6, 3))
    G[0:3, 0:2] = -R[:, 0:2] * dt
    G[3:6, 2] = np.array([0.0, 0.0, -dt])
    Q = np.zeros((3, 3))
    Q[0:2, 0:2] = odom.sigma_v
    Q[2, 2] = odom.sigma_omega
    P = F @ state.P @ F.T + G @ Q @ G.T
    return FullPoseState(p_new, q_new, 0.5 * (P + P.T))


def _correct_3d(state: FullPoseState, innovation, H, R) -> FullPoseState:
    innovation = np.atleast_1d(np.asarray(innovation, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    ok, dx, P_new = joseph_update(state.P, H, R, innovation)
    if not ok:
        raise SingularUpdateError("innovation covariance is singular")
    q_new = quat.normalize(quat.multiply(state.q, quat.from_rotvec(dx[3:6])))
    return FullPoseState(state.p + dx[0:3], q_new, P_new)


def _align_residual(q, normal):
    """Rotation vector (body frame) aligning the body z-axis with normal."""
    return _align_from_a(quat.to_matrix(q).T @ normal)


def _align_from_a(a):
    """Alignment rotation vector from a = R^T n (body-frame normal)."""
    axis = np.array([-a[1], a[0], 0.0])
    s = np.linalg.norm(axis)
    if s < 1e-12:
        return np.zeros(3)
    angle = np.arctan2(s, a[2])
    return axis / s * angle


def _fd_chart_points(p, e):
    """Nominal chart point plus +/- x and +/- y perturbations, (5, 2)."""
    x, y = p[0], p[1]
    return np.array([[x, y],
                     [x + e, y], [x - e, y],
                     [x, y + e], [x, y - e]])


def pseudo_update(state: FullPoseState, surface: BSplineSurface,
                  config: PseudoMeasurementConfig) -> FullPoseState:
    """Joint elevation + roll/pitch pseudo-measurement.

    Elevation residual S(x, y) - p_z; roll/pitch residual is the
    small-rotation vector aligning the body z-axis with the surface
    normal, heading untouched. Jacobian by central finite differences
    with the surface queries batched over the perturbed states.
    """
    e = FD_STEP
    pts = _fd_chart_points(state.p, e)
    z, g = surface.elevation_gradient_many(pts)
    n = np.column_stack([-g[:, 0], -g[:, 1], np.ones(len(g))])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    R0 = quat.to_matrix(state.q)
    a = n @ R0                      # rows are R0^T n_i

    rp0 = _align_from_a(a[0])
    y0 = np.array([z[0] - state.p[2], rp0[0], rp0[1]])
    H = np.zeros((3, 6))
    # chart-position columns: elevation and normal both move
    for j, (ip, im) in enumerate(((1, 2), (3, 4))):
        H[0, j] = -(z[ip] - z[im]) / (2 * e)
        drp = _align_from_a(a[ip]) - _align_from_a(a[im])
        H[1:3, j] = -drp[0:2] / (2 * e)
    # elevation column: residual S(x, y) - p_z is linear in p_z
    H[0, 2] = 1.0
    # attitude columns: R = R0 Exp(dv) gives R^T n = Exp(-dv) a0
    for j in range(3):
        dv = np.zeros(3)
        dv[j] = e
        dR = quat.to_matrix(quat.from_rotvec(dv))
        drp = _align_from_a(dR.T @ a[0]) - _align_from_a(dR @ a[0])
        H[1:3, 3 + j] = -drp[0:2] / (2 * e)
    R = np.diag([config.sigma_z ** 2,
                 config.sigma_rp ** 2, config.sigma_rp ** 2])
    return _correct_3d(state, y0, H, R)


def _sensor_pose(state: FullPoseState, ext: RobotExtrinsics):
    R = quat.to_matrix(state.q)
    pos = state.p + R @ ext.r_RS
    q = quat.canonicalize(quat.multiply(state.q, ext.q_RS))
    return pos, q


def pose_update_3d(state: FullPoseState, extrinsics: RobotExtrinsics,
                   meas: PoseMeasurement) -> FullPoseState:
    """Standard loosely-coupled pose update with analytic Jacobian."""
    pos, q_pred = _sensor_pose(state, extrinsics)
    rot_res = quat.small_angle(
        quat.multiply(quat.conjugate(q_pred), meas.z_q))
    y = np.concatenate([meas.z_p - pos, rot_res])
    R_wb = quat.to_matrix(state.q)
    R_bs = quat.to_matrix(extrinsics.q_RS)
    H = np.zeros((6, 6))
    H[0:3, 0:3] = np.eye(3)
    H[0:3, 3:6] = -R_wb @ _skew(extrinsics.r_RS)
    H[3:6, 3:6] = R_bs.T
    return _correct_3d(state, y, H, meas.P_m)


def range_update_3d(state: FullPoseState, extrinsics: RobotExtrinsics,
                    meas: RangeMeasurement) -> FullPoseState:
    """Standard tightly-coupled range update with analytic Jacobian."""
    R = quat.to_matrix(state.q)
    pos = state.p + R @ extrinsics.r_RS
    d = pos - meas.r_A
    dist = np.linalg.norm(d)
    if dist < 1e-6:
        raise DegenerateGeometryError("anchor coincides with sensor")
    u = d / dist
    H = np.zeros((1, 6))
    H[0, 0:3] = u
    H[0, 3:6] = -u @ R @ _skew(extrinsics.r_RS)
    return _correct_3d(state, np.array([meas.z_d - dist]), H,
                       np.array([[meas.R_d]]))


def chart_errors(state: FullPoseState, surface: BSplineSurface):
    """Map a 3-D pose estimate to (chart position, heading) for comparison.

    Heading is extracted by removing the tangent-frame component of the
    attitude; the covariance is pushed through the map by central finite
    differences so all filters are scored in the same space.
    """
    e = FD_STEP
    pts = _fd_chart_points(state.p, e)
    frames = surface.tangent_frame_many(pts)
    R0 = quat.to_matrix(state.q)
    # heading gamma_i = atan2 of the first column of frame_i^T R0
    cols = np.einsum("nji,j->ni", frames, R0[:, 0])
    gammas = np.arctan2(cols[:, 1], cols[:, 0])
    x0 = np.array([state.p[0], state.p[1], gammas[0]])

    J = np.zeros((3, 6))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[2, 0] = wrap_angle(gammas[1] - gammas[2]) / (2 * e)
    J[2, 1] = wrap_angle(gammas[3] - gammas[4]) / (2 * e)
    # attitude columns: frame fixed, R = R0 Exp(+-dv)
    M0 = frames[0].T @ R0
    for j in range(3):
        dv = np.zeros(3)
        dv[j] = e
        dR = quat.to_matrix(quat.from_rotvec(dv))
        cp = M0 @ dR[:, 0]
        cm = M0 @ dR.T[:, 0]
        dg = wrap_angle(np.arctan2(cp[1], cp[0]) - np.arctan2(cm[1], cm[0]))
        J[2, 3 + j] = dg / (2 * e)
    P_eval = J @ state.P @ J.T
    return x0, 0.5 * (P_eval + P_eval.T)
