"""Pose and range measurement models in world coordinates.

Loosely-coupled pose (position + quaternion) and tightly-coupled range
corrections evaluated in R^3. Measurement Jacobians are obtained by
central finite differences of the prediction functions in the error
state, which keeps them valid on arbitrary surfaces.
"""

from dataclasses import dataclass

import numpy as np

from . import quat, _kernels
from .core import FD_STEP, FilterState, RobotExtrinsics, correct
from .errors import DegenerateGeometryError, OutOfChartError
from .surface import BSplineSurface


@dataclass
class PoseMeasurement:
    z_p: np.ndarray          # measured position (3,), m
    z_q: np.ndarray          # measured orientation, wxyz unit quaternion
    P_m: np.ndarray          # 6x6 covariance, (position, small-angle rot)

    def __post_init__(self):
        self.z_p = np.asarray(self.z_p, dtype=float)
        self.z_q = quat.normalize(self.z_q)
        self.P_m = np.asarray(self.P_m, dtype=float)


@dataclass
class RangeMeasurement:
    r_A: np.ndarray          # anchor position in world (3,), m
    z_d: float               # measured distance, m
    R_d: float               # range variance, m^2

    def __post_init__(self):
        self.r_A = np.asarray(self.r_A, dtype=float)
        if self.z_d < 0:
            raise ValueError("measured distance must be non-negative")
        if self.R_d <= 0:
            raise ValueError("range variance must be positive")


def _predict_many(surface: BSplineSurface, ts: np.ndarray, gammas: np.ndarray,
                  ext: RobotExtrinsics, with_quat: bool = True):
    """Predicted sensor positions (and quaternions) for state batches."""
    if _kernels.HAVE_NUMBA:
        (u_lo, u_hi), (v_lo, v_hi) = surface.domain
        ok, pos, quats = _kernels.predict_pose_points(
            surface.knots_u, surface.degree_u,
            surface.knots_v, surface.degree_v, surface.control_points,
            u_lo, u_hi, v_lo, v_hi,
            np.ascontiguousarray(ts), gammas, ext.r_RS, ext.q_RS)
        if not ok:
            raise OutOfChartError("chart point outside domain")
        return pos, (quats if with_quat else None)
    if with_quat:
        frames, z, q_frames = surface.frame_elevation_quat_many(ts)
    else:
        frames, z = surface.frame_and_elevation_many(ts)
    pos = np.column_stack([ts, z])
    if np.any(ext.r_RS):
        # R_WR r_RS = frame @ Rz(gamma) @ r_RS, batched over states
        c, s = np.cos(gammas), np.sin(gammas)
        rx = c * ext.r_RS[0] - s * ext.r_RS[1]
        ry = s * ext.r_RS[0] + c * ext.r_RS[1]
        lever = np.stack([rx, ry, np.full_like(rx, ext.r_RS[2])], axis=1)
        pos = pos + np.einsum("nij,nj->ni", frames, lever)
    if not with_quat:
        return pos, None
    half = 0.5 * gammas
    qz = np.zeros((len(gammas), 4))
    qz[:, 0] = np.cos(half)
    qz[:, 3] = np.sin(half)
    quats = quat.multiply_many(q_frames, qz)
    if not np.allclose(ext.q_RS, (1.0, 0.0, 0.0, 0.0)):
        quats = quat.multiply_many(
            quats, np.broadcast_to(ext.q_RS, quats.shape))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    quats[quats[:, 0] < 0] *= -1.0
    return pos, quats


def _perturbed_states(state: FilterState):
    """Nominal state followed by +/- perturbations of each error coord."""
    t, g = state.t_R, state.gamma_R
    e = FD_STEP
    ts = np.array([t,
                   [t[0] + e, t[1]], [t[0] - e, t[1]],
                   [t[0], t[1] + e], [t[0], t[1] - e],
                   t, t])
    gammas = np.array([g, g, g, g, g, g + e, g - e])
    return ts, gammas


def predict_pose(surface: BSplineSurface, state: FilterState,
                 extrinsics: RobotExtrinsics):
    """Predicted sensor position and orientation in the world frame."""
    pos, quats = _predict_many(surface, state.t_R[None, :],
                               np.array([state.gamma_R]), extrinsics)
    return pos[0], quats[0]


def _pose_residual(meas: PoseMeasurement, pos: np.ndarray, q: np.ndarray):
    rot = quat.small_angle(quat.multiply(quat.conjugate(q), meas.z_q))
    return np.concatenate([meas.z_p - pos, rot])


def _pose_residuals_many(meas: PoseMeasurement, pos: np.ndarray,
                         quats: np.ndarray) -> np.ndarray:
    """(N, 6) residuals [position; small-angle rotation], batched."""
    conj = quats * np.array([1.0, -1.0, -1.0, -1.0])
    qe = quat.multiply_many(conj, np.broadcast_to(meas.z_q, quats.shape))
    qe[qe[:, 0] < 0] *= -1.0
    return np.hstack([meas.z_p - pos, 2.0 * qe[:, 1:]])


def _pose_residual_jacobian(state: FilterState, surface: BSplineSurface,
                            extrinsics: RobotExtrinsics,
                            meas: PoseMeasurement):
    """(y0, H) for the six-row pose model, kernel or numpy path."""
    if _kernels.HAVE_NUMBA:
        (u_lo, u_hi), (v_lo, v_hi) = surface.domain
        ok, y0, H = _kernels.pose_residual_jacobian(
            surface.knots_u, surface.degree_u,
            surface.knots_v, surface.degree_v, surface.control_points,
            u_lo, u_hi, v_lo, v_hi,
            state.t_R, state.gamma_R, extrinsics.r_RS, extrinsics.q_RS,
            meas.z_p, meas.z_q, FD_STEP)
        if not ok:
            raise OutOfChartError("chart point outside domain")
        return y0, H
    ts, gammas = _perturbed_states(state)
    pos, quats = _predict_many(surface, ts, gammas, extrinsics)
    y = _pose_residuals_many(meas, pos, quats)
    H = -(y[1::2] - y[2::2]).T / (2 * FD_STEP)
    return y[0], H


def pose_update(state: FilterState, surface: BSplineSurface,
                extrinsics: RobotExtrinsics,
                meas: PoseMeasurement) -> FilterState:
    """Six-row pose correction with finite-difference Jacobian."""
    y0, H = _pose_residual_jacobian(state, surface, extrinsics, meas)
    return correct(state, y0, H, meas.P_m)


def predict_range(surface: BSplineSurface, state: FilterState,
                  extrinsics: RobotExtrinsics, anchor: np.ndarray) -> float:
    pos, _ = _predict_many(surface, state.t_R[None, :],
                           np.array([state.gamma_R]), extrinsics,
                           with_quat=False)
    return float(np.linalg.norm(pos[0] - np.asarray(anchor, dtype=float)))


def range_update(state: FilterState, surface: BSplineSurface,
                 extrinsics: RobotExtrinsics,
                 meas: RangeMeasurement) -> FilterState:
    """Scalar range correction with finite-difference Jacobian."""
    if _kernels.HAVE_NUMBA:
        (u_lo, u_hi), (v_lo, v_hi) = surface.domain
        ok, d0, H = _kernels.range_residual_jacobian(
            surface.knots_u, surface.degree_u,
            surface.knots_v, surface.degree_v, surface.control_points,
            u_lo, u_hi, v_lo, v_hi,
            state.t_R, state.gamma_R, extrinsics.r_RS, extrinsics.q_RS,
            meas.r_A, FD_STEP)
        if not ok:
            raise OutOfChartError("chart point outside domain")
    else:
        ts, gammas = _perturbed_states(state)
        pos, _ = _predict_many(surface, ts, gammas, extrinsics,
                               with_quat=False)
        d = np.linalg.norm(pos - meas.r_A, axis=1)
        H = ((d[1::2] - d[2::2]) / (2 * FD_STEP))[None, :]
        d0 = d[0]
    if d0 < 1e-6:
        raise DegenerateGeometryError("anchor coincides with sensor")
    innovation = np.array([meas.z_d - d0])
    return correct(state, innovation, H, np.array([[meas.R_d]]))


def orientation_update(state: FilterState, surface: BSplineSurface,
                       extrinsics: RobotExtrinsics,
                       meas: PoseMeasurement) -> FilterState:
    """Rotation-only correction using the quaternion part of a pose.

    Used by the chart-projected filter variant, which replaces the
    position rows with projected chart measurements but still needs the
    orientation rows to keep the heading observable.
    """
    y0, H = _pose_residual_jacobian(state, surface, extrinsics, meas)
    return correct(state, y0[3:], H[3:], meas.P_m[3:6, 3:6])
