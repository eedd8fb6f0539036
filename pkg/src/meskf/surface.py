"""Explicit b-spline elevation surfaces and their chart geometry.

A surface is the graph z = S(u, v) of a clamped tensor-product b-spline
over a rectangular chart domain. Chart points are length-2 arrays (u, v),
world points length-3 arrays (x, y, z). Every query also has a batched
variant operating on (N, 2) / (N, 3) arrays; the batched paths are the
hot ones, used by the filters' finite-difference Jacobians.

The chart map is the vertical projection: sigma(x, y, z) = (x, y) and
sigma^{-1}(u, v) = (u, v, S(u, v)).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import bspline, _kernels
from .errors import ConfigError, NumericalFailureError, OutOfChartError

CHART_JACOBIAN = np.array([[1.0, 0.0, 0.0],
                           [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class BSplineSurface:
    """Immutable clamped b-spline elevation surface z = S(u, v).

    control_points is an (n+1, m+1) grid of scalar elevations, row index
    running along u. Elevation and gradient are evaluated in one fused
    basis-recurrence pass so joint queries cost little more than either
    alone.
    """

    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    control_points: np.ndarray
    _offs_u: np.ndarray = field(init=False, repr=False)
    _offs_v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ku = np.ascontiguousarray(self.knots_u, dtype=float)
        kv = np.ascontiguousarray(self.knots_v, dtype=float)
        cp = np.ascontiguousarray(self.control_points, dtype=float)
        for name, k, deg in (("knots_u", ku, self.degree_u),
                             ("knots_v", kv, self.degree_v)):
            if deg < 1:
                raise ValueError(f"degree for {name} must be >= 1")
            if np.any(np.diff(k) < 0):
                raise ValueError(f"{name} must be nondecreasing")
            if not (np.all(k[:deg + 1] == k[0])
                    and np.all(k[-deg - 1:] == k[-1])):
                raise ValueError(f"{name} must be clamped (ends repeated "
                                 f"degree+1 times)")
        if cp.ndim != 2:
            raise ValueError("control_points must be a 2-D grid")
        if cp.shape != (len(ku) - self.degree_u - 1,
                        len(kv) - self.degree_v - 1):
            raise ValueError("control grid inconsistent with knot counts")
        object.__setattr__(self, "knots_u", ku)
        object.__setattr__(self, "knots_v", kv)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "_offs_u", np.arange(self.degree_u + 1))
        object.__setattr__(self, "_offs_v", np.arange(self.degree_v + 1))

    @property
    def domain(self):
        """((u_min, u_max), (v_min, v_max)) chart parameter rectangle."""
        return ((self.knots_u[self.degree_u],
                 self.knots_u[-self.degree_u - 1]),
                (self.knots_v[self.degree_v],
                 self.knots_v[-self.degree_v - 1]))

    def contains(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        (u0, u1), (v0, v1) = self.domain
        return ((t[:, 0] >= u0) & (t[:, 0] <= u1)
                & (t[:, 1] >= v0) & (t[:, 1] <= v1))

    def _check_domain(self, t2: np.ndarray):
        if not np.all(np.isfinite(t2)):
            raise OutOfChartError("chart query is not finite")
        (u0, u1), (v0, v1) = self.domain
        if (t2[:, 0].min() < u0 or t2[:, 0].max() > u1
                or t2[:, 1].min() < v0 or t2[:, 1].max() > v1):
            raise OutOfChartError(
                f"chart point outside domain u:[{u0},{u1}] v:[{v0},{v1}]")

    # -- elevation / gradient ------------------------------------------------

    def _eval_fused(self, t: np.ndarray):
        """Elevation and exact analytic gradient in one basis pass.

        Returns (z, grad) with z of shape (N,) and grad of shape (N, 2);
        the hot path behind every geometry query. Assumes t is already a
        validated (N, 2) float array. Uses the jitted kernel when numba
        is available, the numpy path otherwise.
        """
        if _kernels.HAVE_NUMBA:
            z, gx, gy = _kernels.fused_surface_eval(
                self.knots_u, self.degree_u, self.knots_v, self.degree_v,
                self.control_points, np.ascontiguousarray(t))
            return z, np.stack([gx, gy], axis=1)
        return self._eval_fused_numpy(t)

    def _eval_fused_numpy(self, t: np.ndarray):
        """Pure-numpy reference for ``_eval_fused`` (same contract)."""
        u, v = t[:, 0], t[:, 1]
        su = bspline.find_spans(self.knots_u, self.degree_u, u)
        sv = bspline.find_spans(self.knots_v, self.degree_v, v)
        bu, du = bspline.basis_and_derivatives(self.knots_u, self.degree_u,
                                               su, u)
        bv, dv = bspline.basis_and_derivatives(self.knots_v, self.degree_v,
                                               sv, v)
        iu = su[:, None] - self.degree_u + self._offs_u
        iv = sv[:, None] - self.degree_v + self._offs_v
        cp = self.control_points[iu[:, :, None], iv[:, None, :]]
        wb = np.matmul(cp, bv[:, :, None])[:, :, 0]
        wd = np.matmul(cp, dv[:, :, None])[:, :, 0]
        z = np.einsum("ni,ni->n", bu, wb)
        grad = np.stack([np.einsum("ni,ni->n", du, wb),
                         np.einsum("ni,ni->n", bu, wd)], axis=1)
        return z, grad

    def elevation_many(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        self._check_domain(t)
        return bspline.tensor_eval(self.control_points,
                                   self.knots_u, self.degree_u,
                                   self.knots_v, self.degree_v,
                                   t[:, 0], t[:, 1])

    def elevation(self, t: np.ndarray) -> float:
        return float(self.elevation_many(np.asarray(t)[None, :])[0])

    def gradient_many(self, t: np.ndarray) -> np.ndarray:
        """(N, 2) array of (dS/du, dS/dv), exact analytic derivatives."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        self._check_domain(t)
        return self._eval_fused(t)[1]

    def gradient(self, t: np.ndarray) -> np.ndarray:
        return self.gradient_many(np.asarray(t)[None, :])[0]

    def elevation_gradient_many(self, t: np.ndarray):
        """(z, grad) in one call; cheaper than two separate queries."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        self._check_domain(t)
        return self._eval_fused(t)

    # -- chart maps ----------------------------------------------------------

    def chart_to_world_many(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        z = self.elevation_many(t)
        return np.column_stack([t, z])

    def chart_to_world(self, t: np.ndarray) -> np.ndarray:
        return self.chart_to_world_many(np.asarray(t)[None, :])[0]

    # -- tangent frames ------------------------------------------------------

    def tangent_frame_many(self, t: np.ndarray) -> np.ndarray:
        """(N, 3, 3) rotation matrices [B1' | B2' | N'] at chart points.

        Composed as R_x(alpha) R_y(beta) with alpha = arctan(dS/dv) and
        beta = -arctan(dS/du * cos(alpha)), which makes the third column
        the exact unit upward normal of z = S(u, v).
        """
        g = self.gradient_many(t)
        return _frames_from_gradient(g)

    def frame_and_elevation_many(self, t: np.ndarray):
        """(frames, z) at chart points, sharing one basis evaluation."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        self._check_domain(t)
        z, g = self._eval_fused(t)
        return _frames_from_gradient(g), z

    def frame_elevation_quat_many(self, t: np.ndarray):
        """(frames, z, quats) with the frame quaternions in closed form.

        The frame is R_x(alpha) R_y(beta), so its quaternion is the
        product of the two elementary half-angle quaternions; this
        avoids a matrix-to-quaternion extraction on the hot path.
        """
        t = np.atleast_2d(np.asarray(t, dtype=float))
        self._check_domain(t)
        z, g = self._eval_fused(t)
        frames, alpha, beta = _frames_from_gradient(g, with_angles=True)
        ca, sa = np.cos(0.5 * alpha), np.sin(0.5 * alpha)
        cb, sb = np.cos(0.5 * beta), np.sin(0.5 * beta)
        quats = np.stack([ca * cb, sa * cb, ca * sb, sa * sb], axis=1)
        return frames, z, quats

    def tangent_frame(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return self.tangent_frame_many(t)[0]

    def normal(self, t: np.ndarray) -> np.ndarray:
        g = self.gradient(np.asarray(t))
        n = np.array([-g[0], -g[1], 1.0])
        return n / np.linalg.norm(n)

    # -- closest point -------------------------------------------------------

    def closest_point(self, r: np.ndarray, max_iter: int = 50,
                      tol: float = 1e-10) -> np.ndarray:
        """Local minimizer of ||r - sigma^{-1}(t)|| by damped Gauss-Newton.

        Initialized at the vertical projection of r; iterates are clipped
        to the chart domain. Raises NumericalFailureError (carrying the
        best iterate) if the step norm does not drop below tol.
        """
        r = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(r)):
            raise ValueError("query point must be finite")
        (u0, u1), (v0, v1) = self.domain
        t = np.array([np.clip(r[0], u0, u1), np.clip(r[1], v0, v1)])
        z, grad = self._eval_fused(t[None, :])
        p = np.array([t[0], t[1], z[0]])
        g = grad[0]
        cost = np.dot(r - p, r - p)
        for _ in range(max_iter):
            res = r - p
            # Jacobian of sigma^{-1} is [[1,0],[0,1],[Su,Sv]]
            jtr = np.array([res[0] + g[0] * res[2],
                            res[1] + g[1] * res[2]])
            jtj = np.array([[1.0 + g[0] * g[0], g[0] * g[1]],
                            [g[0] * g[1], 1.0 + g[1] * g[1]]])
            step = np.linalg.solve(jtj, jtr)
            if np.linalg.norm(step) < tol:
                return p
            # backtracking damping on the squared residual
            lam = 1.0
            for _ in range(20):
                t_new = np.array([np.clip(t[0] + lam * step[0], u0, u1),
                                  np.clip(t[1] + lam * step[1], v0, v1)])
                z, grad = self._eval_fused(t_new[None, :])
                p_new = np.array([t_new[0], t_new[1], z[0]])
                cost_new = np.dot(r - p_new, r - p_new)
                if cost_new <= cost:
                    break
                lam *= 0.5
            moved = np.linalg.norm(t_new - t)
            t, p, g, cost = t_new, p_new, grad[0], cost_new
            if lam * np.linalg.norm(step) < tol or moved < tol:
                return p
        raise NumericalFailureError(
            "closest-point iteration did not converge", best=p)


def _frames_from_gradient(g: np.ndarray, with_angles: bool = False):
    """(N, 3, 3) frames R_x(alpha) R_y(beta) from surface gradients."""
    sx, sy = g[:, 0], g[:, 1]
    alpha = np.arctan(sy)
    ca, sa = np.cos(alpha), np.sin(alpha)
    beta = -np.arctan(sx * ca)
    cb, sb = np.cos(beta), np.sin(beta)
    r = np.empty((len(sx), 3, 3))
    # R_x(alpha) @ R_y(beta), written out
    r[:, 0, 0] = cb
    r[:, 0, 1] = 0.0
    r[:, 0, 2] = sb
    r[:, 1, 0] = sa * sb
    r[:, 1, 1] = ca
    r[:, 1, 2] = -sa * cb
    r[:, 2, 0] = -ca * sb
    r[:, 2, 1] = sa
    r[:, 2, 2] = ca * cb
    if with_angles:
        return r, alpha, beta
    return r


def world_to_chart(p: np.ndarray) -> np.ndarray:
    """Chart map sigma: drop the elevation coordinate."""
    p = np.asarray(p, dtype=float)
    return p[..., :2].copy()


def chart_jacobian() -> np.ndarray:
    """d sigma / d p for the explicit chart: constant [[1,0,0],[0,1,0]]."""
    return CHART_JACOBIAN.copy()


def flat_surface(extent: float = 10.0, size: int = 4,
                 degree: int = 3) -> BSplineSurface:
    """Zero-elevation surface over [-extent, extent]^2, handy in tests."""
    return surface_from_grid(np.zeros((size + degree, size + degree)),
                             (-extent, extent), (-extent, extent), degree)


def surface_from_grid(control: np.ndarray, u_range, v_range,
                      degree: int = 3) -> BSplineSurface:
    """Build a clamped surface with uniformly spaced interior knots."""
    control = np.asarray(control, dtype=float)

    def clamped(n_ctrl, lo, hi, deg):
        n_int = n_ctrl - deg - 1
        inner = np.linspace(lo, hi, n_int + 2)[1:-1]
        return np.concatenate([[lo] * (deg + 1), inner, [hi] * (deg + 1)])

    return BSplineSurface(
        degree_u=degree, degree_v=degree,
        knots_u=clamped(control.shape[0], *u_range, degree),
        knots_v=clamped(control.shape[1], *v_range, degree),
        control_points=control)


def load_surface(path) -> BSplineSurface:
    """Load a surface definition JSON file.

    Schema: {"degree_u": int, "degree_v": int, "knots_u": [...],
    "knots_v": [...], "control_points": [[...]]} with the control grid
    row-major in u.
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(str(e), field=str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}", field=str(path)) from e
    return surface_from_dict(data)


def surface_from_dict(data: dict) -> BSplineSurface:
    for key in ("degree_u", "degree_v", "knots_u", "knots_v",
                "control_points"):
        if key not in data:
            raise ConfigError("missing required field", field=f"surface.{key}")
    try:
        return BSplineSurface(
            degree_u=int(data["degree_u"]),
            degree_v=int(data["degree_v"]),
            knots_u=np.asarray(data["knots_u"], dtype=float),
            knots_v=np.asarray(data["knots_v"], dtype=float),
            control_points=np.asarray(data["control_points"], dtype=float))
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e), field="surface") from e


def save_surface(surface: BSplineSurface, path):
    data = {
        "degree_u": surface.degree_u,
        "degree_v": surface.degree_v,
        "knots_u": surface.knots_u.tolist(),
        "knots_v": surface.knots_v.tolist(),
        "control_points": surface.control_points.tolist(),
    }
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
