"""Chart-space error-state filter core.

State: chart position t_R (2,), heading gamma_R within the tangent
plane, and the 3x3 error covariance P_x over (dt_R, dtheta_R). The
nominal state propagates with the measured velocities mapped through
the tangent frame; corrections are generic Kalman updates in Joseph
form shared by all measurement models.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SingularUpdateError
from .surface import BSplineSurface

FD_STEP = 1e-6


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


@dataclass
class FilterState:
    t_R: np.ndarray          # chart position (2,), m
    gamma_R: float           # heading, rad, wrapped to (-pi, pi]
    P_x: np.ndarray          # 3x3 error covariance

    def __post_init__(self):
        self.t_R = np.asarray(self.t_R, dtype=float).copy()
        self.gamma_R = wrap_angle(float(self.gamma_R))
        self.P_x = np.asarray(self.P_x, dtype=float).copy()

    def copy(self) -> "FilterState":
        return FilterState(self.t_R, self.gamma_R, self.P_x)


@dataclass
class OdometryInput:
    v_m: np.ndarray          # body-frame linear velocity (2,), m/s
    omega_m: float           # angular rate, rad/s
    sigma_v: np.ndarray      # 2x2 velocity noise covariance
    sigma_omega: float       # angular-rate noise variance

    def __post_init__(self):
        self.v_m = np.asarray(self.v_m, dtype=float)
        self.sigma_v = np.asarray(self.sigma_v, dtype=float)


@dataclass
class RobotExtrinsics:
    r_RS: np.ndarray         # sensor lever arm in robot frame (3,), m
    q_RS: np.ndarray         # sensor orientation in robot frame, wxyz

    def __post_init__(self):
        self.r_RS = np.asarray(self.r_RS, dtype=float)
        self.q_RS = np.asarray(self.q_RS, dtype=float)
        n = np.linalg.norm(self.q_RS)
        if abs(n - 1.0) > 1e-12:
            self.q_RS = self.q_RS / n

    @staticmethod
    def identity() -> "RobotExtrinsics":
        return RobotExtrinsics(np.zeros(3), np.array([1.0, 0, 0, 0]))


def heading_rotation_2d(gamma):
    c, s = np.cos(gamma), np.sin(gamma)
    return np.array([[c, -s], [s, c]])


def robot_rotation(surface: BSplineSurface, state: FilterState) -> np.ndarray:
    """World-from-robot rotation: tangent frame composed with heading."""
    frame = surface.tangent_frame(state.t_R)
    c, s = np.cos(state.gamma_R), np.sin(state.gamma_R)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return frame @ rz


def _displacement(frame2: np.ndarray, gamma, v_m: np.ndarray, dt):
    """Chart displacement for a 2x2 tangent-frame block and heading.

    frame2 may be (2, 2) or batched (N, 2, 2); gamma scalar or (N,).
    """
    c, s = np.cos(gamma), np.sin(gamma)
    vx = c * v_m[0] - s * v_m[1]
    vy = s * v_m[0] + c * v_m[1]
    if frame2.ndim == 3:
        v = np.stack([np.broadcast_to(vx, frame2.shape[0]),
                      np.broadcast_to(vy, frame2.shape[0])], axis=1)
        return np.einsum("nij,nj->ni", frame2, v) * dt
    return frame2 @ np.array([vx, vy]) * dt


def error_jacobians(surface: BSplineSurface, state: FilterState,
                    odom: OdometryInput, dt):
    """Discrete error-state Jacobians (F, G) of the displacement model.

    Position rows of F by central finite differences of the displacement
    in each state coordinate; heading row exact. G is analytic: the
    model is linear in the input noise.
    """
    t, g = state.t_R, state.gamma_R
    e = FD_STEP
    pts = np.array([t,
                    [t[0] + e, t[1]], [t[0] - e, t[1]],
                    [t[0], t[1] + e], [t[0], t[1] - e]])
    frames2 = surface.tangent_frame_many(pts)[:, 0:2, 0:2]
    d_t = _displacement(frames2[1:], g, odom.v_m, dt)          # (4, 2)
    d_g = _displacement(
        np.broadcast_to(frames2[0], (2, 2, 2)),
        np.array([g + e, g - e]), odom.v_m, dt)                # (2, 2)

    F = np.eye(3)
    F[0:2, 0] += (d_t[0] - d_t[1]) / (2 * e)
    F[0:2, 1] += (d_t[2] - d_t[3]) / (2 * e)
    F[0:2, 2] = (d_g[0] - d_g[1]) / (2 * e)

    G = np.zeros((3, 3))
    G[0:2, 0:2] = -frames2[0] @ heading_rotation_2d(g) * dt
    G[2, 2] = dt
    return F, G, frames2[0]


def propagate(surface: BSplineSurface, state: FilterState,
              odom: OdometryInput, dt) -> FilterState:
    """One discrete propagation step evaluated at the pre-step state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    F, G, frame2 = error_jacobians(surface, state, odom, dt)
    t_new = state.t_R + _displacement(frame2, state.gamma_R, odom.v_m, dt)
    surface._check_domain(t_new[None, :])
    gamma_new = wrap_angle(state.gamma_R + odom.omega_m * dt)
    # Noise covariances are per-sample; G already carries dt.
    Q = np.zeros((3, 3))
    Q[0:2, 0:2] = odom.sigma_v
    Q[2, 2] = odom.sigma_omega
    P = F @ state.P_x @ F.T + G @ Q @ G.T
    return FilterState(t_new, gamma_new, 0.5 * (P + P.T))


def correct(state: FilterState, innovation: np.ndarray, H: np.ndarray,
            R: np.ndarray) -> FilterState:
    """Generic ESEKF correction: gain, injection, Joseph covariance.

    The error reset Jacobian is the identity for this vector-plus-angle
    parameterization, so resetting the error is implicit.
    """
    innovation = np.atleast_1d(np.asarray(innovation, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    ok, dx, P_new = joseph_update(state.P_x, H, R, innovation)
    if not ok:
        raise SingularUpdateError("innovation covariance is singular")
    return FilterState(state.t_R + dx[0:2],
                       wrap_angle(state.gamma_R + dx[2]),
                       P_new)


def joseph_update(P: np.ndarray, H: np.ndarray, R: np.ndarray,
                  innovation: np.ndarray):
    """Shared gain/injection/Joseph-covariance core.

    Returns (ok, dx, P_new); ok is False when the innovation covariance
    is singular or its condition number exceeds 1e12 (eigvalsh is far
    cheaper than the SVD behind np.linalg.cond).
    """
    if _kernels.HAVE_NUMBA:
        return _kernels.joseph_core(P, H, R, innovation)
    S = H @ P @ H.T + R
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    if w[0] <= 0.0 or w[-1] > 1e12 * w[0]:
        return False, np.zeros(P.shape[0]), P
    K = np.linalg.solve(S.T, (P @ H.T).T).T
    dx = K @ innovation
    IKH = np.eye(P.shape[0]) - K @ H
    P_new = IKH @ P @ IKH.T + K @ R @ K.T
    return True, dx, 0.5 * (P_new + P_new.T)
