"""Chart projection of position and range measurements."""
import numpy as np
import pytest

from meskf import (DegenerateCovarianceError, DegenerateSamplingError,
                   FilterState, NoIntersectionError, RobotExtrinsics,
                   SamplingConfig, associate_to_surface,
                   ellipsoid_tangent_intersection, project_position,
                   project_range, project_range_variance,
                   projected_position_update, projected_range_update,
                   sample_sigma_region)
from meskf.projection import ProjectedRange

from conftest import make_random_surface, random_spd

IDENT = RobotExtrinsics.identity()


def small_state(t=(0.0, 0.0), g=0.0, var=1e-4):
    return FilterState(np.asarray(t, dtype=float), g, np.eye(3) * var)


class TestEllipsoidIntersection:
    def test_membership_oracle(self):
        # both returned semi-axes lie exactly on the ellipsoid slice
        rng = np.random.default_rng(30)
        for _ in range(1000):
            P = random_spd(rng, 3, 0.1)
            A = rng.standard_normal((3, 3))
            Q, _ = np.linalg.qr(A)
            if np.linalg.det(Q) < 0:
                Q[:, 0] = -Q[:, 0]
            r1, r2 = ellipsoid_tangent_intersection(P, Q)
            Pinv = np.linalg.inv(P)
            assert abs(r1 @ Pinv @ r1 - 1.0) < 1e-9
            assert abs(r2 @ Pinv @ r2 - 1.0) < 1e-9
            # axes live in the tangent plane and are conjugate
            assert abs(r1 @ Q[:, 2]) < 1e-9
            assert abs(r2 @ Q[:, 2]) < 1e-9
            assert abs(r1 @ Pinv @ r2) < 1e-9

    def test_isotropic_gives_sigma_circle(self):
        P = np.eye(3) * 0.04
        r1, r2 = ellipsoid_tangent_intersection(P, np.eye(3))
        np.testing.assert_allclose(np.linalg.norm(r1), 0.2, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(r2), 0.2, atol=1e-12)

    def test_singular_covariance_raises(self):
        P = np.diag([1.0, 1.0, 0.0])
        with pytest.raises(DegenerateCovarianceError):
            ellipsoid_tangent_intersection(P, np.eye(3))


class TestProjectPosition:
    def test_flat_marginalization_exact(self, flat):
        # flat surface: the tangent slice equals the conditional
        # covariance of (x, y) given z, i.e. the inverse of the
        # position block of the precision matrix
        rng = np.random.default_rng(31)
        state = small_state((0.5, -0.5), 0.3)
        for _ in range(50):
            P_m = random_spd(rng, 3, 0.01)
            r_Sm = np.array([0.4, -0.6, 0.02])
            proj = project_position(flat, r_Sm, P_m, IDENT, state)
            P_full = P_m  # identity extrinsics: no lever-arm inflation
            expected = np.linalg.inv(np.linalg.inv(P_full)[0:2, 0:2])
            np.testing.assert_allclose(proj.P_t, expected, atol=1e-9)
            np.testing.assert_allclose(proj.z_t, r_Sm[0:2], atol=1e-9)

    def test_ramp_variance_split(self):
        # plane z = u has unit normal (-1,0,1)/sqrt(2); an isotropic
        # covariance s^2 I slices into semi-axes s and s/sqrt(2),
        # giving chart-variance eigenvalues {s^2, s^2/2}
        ramp = make_ramp()
        s2 = 0.04
        state = small_state()
        proj = project_position(ramp, np.array([0.0, 0.0, 0.0]),
                                np.eye(3) * s2, IDENT, state)
        w = np.sort(np.linalg.eigvalsh(proj.P_t))
        np.testing.assert_allclose(w, [s2 / 2, s2], atol=1e-6)

    def test_association_is_closest_point(self, curved):
        state = small_state((1.0, 1.0))
        r_Sm = curved.chart_to_world(np.array([1.1, 0.9])) + [0, 0, 0.3]
        p = associate_to_surface(curved, r_Sm, IDENT, state)
        np.testing.assert_allclose(p, curved.closest_point(r_Sm), atol=1e-12)

    def test_update_moves_position_only(self, curved):
        state = FilterState(np.array([1.0, 1.0]), 0.5, np.eye(3) * 0.01)
        r_Sm = curved.chart_to_world(np.array([1.05, 0.95]))
        proj = project_position(curved, r_Sm, np.eye(3) * 1e-4, IDENT, state)
        s2 = projected_position_update(state, curved, proj)
        assert np.linalg.norm(s2.t_R - proj.z_t) < np.linalg.norm(
            state.t_R - proj.z_t)
        np.testing.assert_allclose(s2.gamma_R, state.gamma_R, atol=1e-12)


def make_ramp():
    # z = u over [-10, 10]^2: control points linear in u
    n = 8
    u = np.linspace(-10, 10, n)
    # degree-3 clamped spline with uniform interior knots reproduces
    # linears when control points follow the Greville abscissae
    from meskf import surface_from_grid
    from meskf.surface import BSplineSurface
    surf0 = surface_from_grid(np.zeros((n, n)), (-10, 10), (-10, 10), 3)
    grev = np.array([np.mean(surf0.knots_u[i + 1:i + 4]) for i in range(n)])
    control = np.tile(grev[:, None], (1, n))
    return BSplineSurface(3, 3, surf0.knots_u, surf0.knots_v, control)


def test_ramp_is_linear():
    ramp = make_ramp()
    pts = np.random.default_rng(0).uniform(-9, 9, size=(50, 2))
    np.testing.assert_allclose(ramp.elevation_many(pts), pts[:, 0],
                               atol=1e-10)


class TestSampling:
    def test_isotropic_disk_count(self, flat):
        state = small_state(var=1e-4)
        cfg = SamplingConfig(grid_half_width=3.0, grid_resolution=21)
        pts = sample_sigma_region(state, flat, cfg)
        # direct enumeration oracle: grid nodes inside the disk
        axis = np.linspace(-3, 3, 21)
        gu, gv = np.meshgrid(axis, axis, indexing="ij")
        inside = (gu ** 2 + gv ** 2) <= 9.0 + 1e-12
        assert len(pts) == int(inside.sum())

    def test_small_grid_contains_center(self, flat):
        state = small_state(t=(1.0, 2.0))
        cfg = SamplingConfig(grid_resolution=3)
        pts = sample_sigma_region(state, flat, cfg)
        assert any(np.allclose(p, [1.0, 2.0], atol=1e-12) for p in pts)

    def test_diagonal_covariance_aligns_axes(self, flat):
        state = FilterState(np.zeros(2), 0.0, np.diag([0.04, 0.01, 1.0]))
        pts = sample_sigma_region(state, flat, SamplingConfig())
        assert np.max(np.abs(pts[:, 0])) > np.max(np.abs(pts[:, 1])) + 0.1

    def test_determinism(self, curved):
        state = small_state((0.5, 0.5), var=0.01)
        cfg = SamplingConfig()
        p1 = sample_sigma_region(state, curved, cfg)
        p2 = sample_sigma_region(state, curved, cfg)
        np.testing.assert_array_equal(p1, p2)

    def test_degenerate_covariance_raises(self, flat):
        state = FilterState(np.zeros(2), 0.0, np.diag([1.0, 0.0, 1.0]))
        with pytest.raises(DegenerateSamplingError):
            sample_sigma_region(state, flat, SamplingConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplingConfig(grid_resolution=4)
        with pytest.raises(ValueError):
            SamplingConfig(grid_half_width=-1.0)


class TestProjectRangeVariance:
    def test_flat_in_plane_anchor_identity(self, flat):
        state = small_state()
        R_d = 0.0025
        anchor = np.array([5.0, 0.0, 0.0])
        got = project_range_variance(flat, R_d, IDENT, state, anchor)
        np.testing.assert_allclose(got, R_d, atol=1e-12)

    def test_flat_anchor_overhead_floors(self, flat):
        state = small_state()
        anchor = np.array([0.0, 0.0, 5.0])
        got = project_range_variance(flat, 0.0025, IDENT, state, anchor)
        np.testing.assert_allclose(got, 1e-12)

    def test_coincident_anchor_raises(self, flat):
        state = small_state()
        anchor = flat.chart_to_world(state.t_R)
        with pytest.raises(Exception):
            project_range_variance(flat, 0.0025, IDENT, state, anchor)


class TestProjectRange:
    def test_flat_in_plane_matches_euclidean(self, flat):
        state = FilterState(np.zeros(2), 0.0, np.eye(3) * 0.01)
        anchor = np.array([4.0, 3.0, 0.0])
        z_d = 5.0
        proj = project_range(flat, z_d, 0.0025, anchor, IDENT, state,
                             SamplingConfig())
        assert abs(proj.z_dU - z_d) < 0.06   # tol + grid quantization
        np.testing.assert_allclose(proj.t_A_prime, anchor[0:2], atol=1e-9)

    def test_elevated_anchor_pythagorean(self, flat):
        # anchor h above a flat surface: chart distance sqrt(z_d^2 - h^2)
        rng = np.random.default_rng(32)
        cfg = SamplingConfig()
        for _ in range(100):
            t = rng.uniform(-3, 3, size=2)
            state = FilterState(t, rng.uniform(-np.pi, np.pi),
                                np.eye(3) * 0.01)
            h = rng.uniform(0.2, 2.0)
            direction = rng.normal(size=2)
            direction /= np.linalg.norm(direction)
            chart_dist = rng.uniform(2.0, 6.0)
            anchor = np.concatenate([t + chart_dist * direction, [h]])
            z_d = np.hypot(chart_dist, h)
            R_d = 0.0025
            proj = project_range(flat, z_d, R_d, anchor, IDENT, state, cfg)
            expected = np.sqrt(z_d ** 2 - h ** 2)
            # shell tolerance plus sigma-grid quantization bound
            grid_step = 2 * cfg.grid_half_width * 0.1 / (cfg.grid_resolution
                                                         - 1)
            tol = np.sqrt(R_d) + 3 * grid_step
            assert abs(proj.z_dU - expected) < tol

    def test_shell_miss_raises(self, flat):
        state = FilterState(np.zeros(2), 0.0, np.eye(3) * 1e-4)
        anchor = np.array([5.0, 0.0, 0.0])
        with pytest.raises(NoIntersectionError):
            project_range(flat, 20.0, 1e-4, anchor, IDENT, state,
                          SamplingConfig())

    def test_determinism(self, curved):
        state = FilterState(np.array([0.5, -0.5]), 0.2, np.eye(3) * 0.01)
        anchor = np.array([6.0, 1.0, 0.5])
        z_d = np.linalg.norm(curved.chart_to_world(state.t_R) - anchor)
        a = project_range(curved, z_d, 0.0025, anchor, IDENT, state,
                          SamplingConfig())
        b = project_range(curved, z_d, 0.0025, anchor, IDENT, state,
                          SamplingConfig())
        assert a.z_dU == b.z_dU and a.R_dU == b.R_dU
        np.testing.assert_array_equal(a.t_A_prime, b.t_A_prime)


class TestProjectedRangeUpdate:
    def test_consistent_measurement_keeps_mean(self, flat):
        state = FilterState(np.array([1.0, 0.0]), 0.0, np.eye(3) * 0.01)
        proj = ProjectedRange(4.0, 0.0025, np.array([5.0, 0.0]))
        s2 = projected_range_update(state, flat, proj)
        np.testing.assert_allclose(s2.t_R, state.t_R, atol=1e-12)

    def test_single_update_is_rank_one(self, flat):
        state = FilterState(np.array([1.0, 0.0]), 0.0, np.eye(3) * 0.01)
        proj = ProjectedRange(3.8, 0.0025, np.array([5.0, 0.0]))
        s2 = projected_range_update(state, flat, proj)
        # variance along the tangential direction is untouched
        np.testing.assert_allclose(s2.P_x[1, 1], state.P_x[1, 1], atol=1e-12)
        assert s2.P_x[0, 0] < state.P_x[0, 0]

    def test_degenerate_equivalent_anchor(self, flat):
        state = FilterState(np.array([1.0, 0.0]), 0.0, np.eye(3) * 0.01)
        proj = ProjectedRange(0.0, 0.0025, state.t_R.copy())
        with pytest.raises(Exception):
            projected_range_update(state, flat, proj)
