"""Chart-projected measurement corrections.

Position measurements are associated with the surface by closest-point
projection and their covariance ellipsoid is sliced by the local tangent
plane; the slice's semi-axes are mapped through the chart to form a 2-D
measurement. Range measurements are re-expressed as distances on the
chart by sampling the filter's sigma region, intersecting it with the
measured range sphere, and averaging chart distances to an equivalent
anchor. Both schemes feed the ordinary chart-space correction.
"""

from dataclasses import dataclass

import numpy as np

from .core import (FD_STEP, FilterState, RobotExtrinsics, correct,
                   heading_rotation_2d)
from .errors import (DegenerateCovarianceError, DegenerateGeometryError,
                     DegenerateSamplingError, NoIntersectionError)
from .surface import BSplineSurface, world_to_chart


@dataclass
class ProjectedPosition:
    z_t: np.ndarray          # chart-space position measurement (2,)
    P_t: np.ndarray          # 2x2 covariance on the chart

    def __post_init__(self):
        self.z_t = np.asarray(self.z_t, dtype=float)
        self.P_t = np.asarray(self.P_t, dtype=float)


@dataclass
class ProjectedRange:
    z_dU: float              # chart-space distance, m
    R_dU: float              # radial variance on the chart, m^2
    t_A_prime: np.ndarray    # equivalent anchor on the chart (2,)

    def __post_init__(self):
        self.t_A_prime = np.asarray(self.t_A_prime, dtype=float)


@dataclass
class SamplingConfig:
    """Sigma-region sampling parameters for the projected range model.

    shell_tolerance defaults to one range sigma (sqrt of the measurement
    variance) when left as None.
    """
    grid_half_width: float = 3.0      # Mahalanobis radius
    grid_resolution: int = 21         # points per axis, odd
    shell_tolerance: float | None = None

    def __post_init__(self):
        if self.grid_half_width <= 0:
            raise ValueError("grid_half_width must be positive")
        if self.grid_resolution < 3 or self.grid_resolution % 2 == 0:
            raise ValueError("grid_resolution must be odd and >= 3")
        if self.shell_tolerance is not None and self.shell_tolerance <= 0:
            raise ValueError("shell_tolerance must be positive")


def _lever_arm_world(surface, state, extrinsics):
    frame = surface.tangent_frame(state.t_R)
    rz2 = heading_rotation_2d(state.gamma_R)
    r = extrinsics.r_RS
    body = np.array([rz2[0, 0] * r[0] + rz2[0, 1] * r[1],
                     rz2[1, 0] * r[0] + rz2[1, 1] * r[1],
                     r[2]])
    return frame @ body


def _lever_arm_jacobian(surface, state, extrinsics):
    """d(R_WR r_RS)/d(error state), 3x3 by central finite differences."""
    if not np.any(extrinsics.r_RS):
        return np.zeros((3, 3))
    e = FD_STEP
    J = np.empty((3, 3))
    for j in range(3):
        sp, sm = state.copy(), state.copy()
        if j < 2:
            sp.t_R = sp.t_R.copy()
            sm.t_R = sm.t_R.copy()
            sp.t_R[j] += e
            sm.t_R[j] -= e
        else:
            sp.gamma_R += e
            sm.gamma_R -= e
        J[:, j] = (_lever_arm_world(surface, sp, extrinsics)
                   - _lever_arm_world(surface, sm, extrinsics)) / (2 * e)
    return J


def associate_to_surface(surface: BSplineSurface, r_Sm: np.ndarray,
                         extrinsics: RobotExtrinsics,
                         state: FilterState) -> np.ndarray:
    """Closest surface point to the lever-arm-compensated measurement."""
    r_Sm = np.asarray(r_Sm, dtype=float)
    center = r_Sm - _lever_arm_world(surface, state, extrinsics)
    return surface.closest_point(center)


def ellipsoid_tangent_intersection(P_M: np.ndarray, frame: np.ndarray):
    """Semi-axes of the tangent-plane slice of a covariance ellipsoid.

    With T = [B1'|B2'], the slice {y : y^T (T^T P^-1 T) y = 1} in plane
    coordinates is eigendecomposed and its axes lifted back to R^3.
    Returned ordered by eigenvalue (r1 the longer axis).
    """
    P_M = np.asarray(P_M, dtype=float)
    T = frame[:, 0:2]
    try:
        P_inv = np.linalg.inv(P_M)
    except np.linalg.LinAlgError as e:
        raise DegenerateCovarianceError("covariance is singular") from e
    if np.linalg.cond(P_M) > 1e12:
        raise DegenerateCovarianceError("covariance is singular")
    A = T.T @ P_inv @ T
    lam, U = np.linalg.eigh(A)
    if lam[0] <= 0:
        raise DegenerateCovarianceError("tangent slice is degenerate")
    r1 = T @ U[:, 0] / np.sqrt(lam[0])
    r2 = T @ U[:, 1] / np.sqrt(lam[1])
    return r1, r2


def project_position(surface: BSplineSurface, r_Sm: np.ndarray,
                     P_m: np.ndarray, extrinsics: RobotExtrinsics,
                     state: FilterState) -> ProjectedPosition:
    """Project a 3-D position measurement and its covariance to the chart."""
    z_pM = associate_to_surface(surface, r_Sm, extrinsics, state)
    z_t = world_to_chart(z_pM)
    J = _lever_arm_jacobian(surface, state, extrinsics)
    P_M = np.asarray(P_m, dtype=float) + J @ state.P_x @ J.T
    frame = surface.tangent_frame(z_t)
    r1, r2 = ellipsoid_tangent_intersection(P_M, frame)
    M = np.column_stack([r1[0:2], r2[0:2]])    # chart map drops z
    P_t = M @ M.T
    return ProjectedPosition(z_t, P_t)


def projected_position_update(state: FilterState, surface: BSplineSurface,
                              proj: ProjectedPosition) -> FilterState:
    H = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return correct(state, proj.z_t - state.t_R, H, proj.P_t)


def sample_sigma_region(state: FilterState, surface: BSplineSurface,
                        config: SamplingConfig) -> np.ndarray:
    """Deterministic grid over the state's position sigma region.

    A square grid in whitened coordinates is mapped through the Cholesky
    factor of the position covariance block; grid nodes outside the
    Mahalanobis radius or the chart domain are discarded.
    """
    P_pos = state.P_x[0:2, 0:2]
    try:
        L = np.linalg.cholesky(P_pos)
    except np.linalg.LinAlgError as e:
        raise DegenerateSamplingError("position covariance not SPD") from e
    w = config.grid_half_width
    axis = np.linspace(-w, w, config.grid_resolution)
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    g = np.column_stack([gu.ravel(), gv.ravel()])
    g = g[np.einsum("ij,ij->i", g, g) <= w * w + 1e-12]
    pts = state.t_R + g @ L.T
    pts = pts[surface.contains(pts)]
    if len(pts) == 0:
        raise DegenerateSamplingError("no sigma-region samples in domain")
    return pts


def project_range_variance(surface: BSplineSurface, R_d: float,
                           extrinsics: RobotExtrinsics, state: FilterState,
                           anchor_shifted: np.ndarray) -> float:
    """Radial variance on the chart.

    The range variance is carried along the unit anchor-to-sensor
    direction, augmented with the lever-arm state uncertainty, stripped
    of its surface-normal component, and mapped through the chart.
    Floored at 1e-12.
    """
    p_R = surface.chart_to_world(state.t_R)
    d = p_R - anchor_shifted
    dist = np.linalg.norm(d)
    if dist < 1e-6:
        raise DegenerateGeometryError("anchor coincides with sensor")
    n_AS = d / dist
    J_d = _lever_arm_jacobian(surface, state, extrinsics)
    p_d = n_AS * R_d + (J_d @ state.P_x @ J_d.T) @ n_AS
    normal = surface.tangent_frame(state.t_R)[:, 2]
    p_dT = p_d - normal * (normal @ p_d)
    return max(float(np.linalg.norm(p_dT[0:2])), 1e-12)


def project_range(surface: BSplineSurface, z_d: float, R_d: float,
                  anchor: np.ndarray, extrinsics: RobotExtrinsics,
                  state: FilterState,
                  config: SamplingConfig) -> ProjectedRange:
    """Re-express a range measurement as a distance on the chart.

    Raises NoIntersectionError when the range shell misses the sampled
    region entirely; callers fall back to the 3-D range update.
    """
    anchor = np.asarray(anchor, dtype=float)
    A_prime = anchor - _lever_arm_world(surface, state, extrinsics)
    samples = sample_sigma_region(state, surface, config)
    p_R = surface.chart_to_world_many(samples)
    dists = np.linalg.norm(p_R - A_prime, axis=1)
    tol = config.shell_tolerance
    if tol is None:
        tol = np.sqrt(R_d)
    keep = np.abs(dists - z_d) <= tol
    if not np.any(keep):
        raise NoIntersectionError("range shell misses the sigma region")
    t_m = samples[keep]
    t_A = world_to_chart(surface.closest_point(A_prime))
    z_dU = float(np.mean(np.linalg.norm(t_A - t_m, axis=1)))
    R_dU = project_range_variance(surface, R_d, extrinsics, state, A_prime)
    return ProjectedRange(z_dU, R_dU, t_A)


def projected_range_update(state: FilterState, surface: BSplineSurface,
                           proj: ProjectedRange) -> FilterState:
    diff = proj.t_A_prime - state.t_R
    dist = np.linalg.norm(diff)
    if dist < 1e-6:
        raise DegenerateGeometryError("equivalent anchor at state position")
    H = np.array([[-diff[0] / dist, -diff[1] / dist, 0.0]])
    innovation = np.array([proj.z_dU - dist])
    return correct(state, innovation, H, np.array([[proj.R_dU]]))
