"""Surface geometry: frames, gradients, chart maps, closest point."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meskf import (BSplineSurface, OutOfChartError, chart_jacobian,
                   flat_surface, load_surface, save_surface,
                   surface_from_dict, world_to_chart)
from meskf.surface import _frames_from_gradient

from conftest import make_random_surface


def sample_points(surface, n, seed=0, margin=0.5):
    (ulo, uhi), (vlo, vhi) = surface.domain
    rng = np.random.default_rng(seed)
    return rng.uniform([ulo + margin, vlo + margin],
                       [uhi - margin, vhi - margin], size=(n, 2))


def test_gradient_matches_finite_differences(curved):
    pts = sample_points(curved, 200, seed=1)
    g = curved.gradient_many(pts)
    h = 1e-6
    for axis in range(2):
        dp = pts.copy()
        dm = pts.copy()
        dp[:, axis] += h
        dm[:, axis] -= h
        fd = (curved.elevation_many(dp) - curved.elevation_many(dm)) / (2 * h)
        scale = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(g[:, axis] - fd) / scale) < 1e-4


def test_fused_eval_matches_separate_calls(curved):
    pts = sample_points(curved, 300, seed=2)
    z, g = curved.elevation_gradient_many(pts)
    np.testing.assert_allclose(z, curved.elevation_many(pts), atol=1e-13)
    np.testing.assert_allclose(g, curved.gradient_many(pts), atol=1e-13)


def test_kernel_eval_matches_numpy_path(curved):
    pts = sample_points(curved, 300, seed=3)
    z1, g1 = curved._eval_fused(pts)
    z2, g2 = curved._eval_fused_numpy(pts)
    np.testing.assert_allclose(z1, z2, atol=1e-13)
    np.testing.assert_allclose(g1, g2, atol=1e-13)


def test_tangent_frame_orthonormal_and_normal_correct(curved):
    pts = sample_points(curved, 500, seed=4)
    frames = curved.tangent_frame_many(pts)
    g = curved.gradient_many(pts)
    eye = np.eye(3)
    for k in range(len(pts)):
        R = frames[k]
        assert np.max(np.abs(R.T @ R - eye)) < 1e-9
        assert np.linalg.det(R) > 0
        n_exact = np.array([-g[k, 0], -g[k, 1], 1.0])
        n_exact /= np.linalg.norm(n_exact)
        assert np.max(np.abs(R[:, 2] - n_exact)) < 1e-9


def test_frame_quaternion_matches_matrix(curved):
    pts = sample_points(curved, 200, seed=5)
    frames, z, quats = curved.frame_elevation_quat_many(pts)
    from meskf import quat
    ref = quat.from_matrix_many(frames)
    # same rotation up to sign
    dots = np.abs(np.einsum("ni,ni->n", quats, ref))
    np.testing.assert_allclose(dots, 1.0, atol=1e-12)
    np.testing.assert_allclose(z, curved.elevation_many(pts), atol=1e-13)


def test_frames_from_gradient_flat_is_identity():
    r = _frames_from_gradient(np.zeros((3, 2)))
    np.testing.assert_allclose(r, np.broadcast_to(np.eye(3), (3, 3, 3)),
                               atol=1e-15)


def test_chart_roundtrip_identity(curved):
    pts = sample_points(curved, 1000, seed=6)
    world = curved.chart_to_world_many(pts)
    np.testing.assert_allclose(world[:, 0:2], pts, atol=1e-13)
    np.testing.assert_allclose(world_to_chart(world.T).T
                               if world.ndim == 1 else
                               np.array([world_to_chart(w) for w in world]),
                               pts, atol=1e-13)
    np.testing.assert_allclose(world[:, 2], curved.elevation_many(pts),
                               atol=1e-13)


def test_chart_jacobian_drops_z():
    J = chart_jacobian()
    assert J.shape == (2, 3)
    np.testing.assert_allclose(J, np.array([[1.0, 0, 0], [0, 1.0, 0]]))


def test_flat_surface_is_zero(flat):
    pts = sample_points(flat, 100, seed=7)
    assert np.max(np.abs(flat.elevation_many(pts))) < 1e-12
    assert np.max(np.abs(flat.gradient_many(pts))) < 1e-12


def test_out_of_domain_raises(curved):
    (ulo, uhi), _ = curved.domain
    with pytest.raises(OutOfChartError):
        curved.elevation(np.array([uhi + 1.0, 0.0]))


def test_contains(curved):
    (ulo, uhi), (vlo, vhi) = curved.domain
    t = np.array([[0.0, 0.0], [uhi + 0.1, 0.0], [0.0, vlo - 0.1]])
    np.testing.assert_array_equal(curved.contains(t), [True, False, False])


class TestClosestPoint:
    def test_grid_search_oracle(self, curved):
        rng = np.random.default_rng(8)
        for k in range(10):
            t0 = rng.uniform(-8, 8, size=2)
            p0 = curved.chart_to_world(t0)
            n = curved.normal(t0)
            r = p0 + rng.uniform(-0.5, 0.5) * n + rng.normal(0, 0.1, size=3)
            t_star = world_to_chart(curved.closest_point(r))
            # dense local grid around the solver's answer
            span = 0.3
            axis = np.linspace(-span, span, 301)
            gu, gv = np.meshgrid(axis, axis, indexing="ij")
            cand = t_star + np.column_stack([gu.ravel(), gv.ravel()])
            cand = cand[curved.contains(cand)]
            world = curved.chart_to_world_many(cand)
            d_grid = np.min(np.linalg.norm(world - r, axis=1))
            d_star = np.linalg.norm(curved.chart_to_world(t_star) - r)
            assert d_star <= d_grid + 1e-9

    def test_residual_orthogonality(self, curved):
        rng = np.random.default_rng(9)
        for k in range(50):
            t0 = rng.uniform(-8, 8, size=2)
            r = curved.chart_to_world(t0) + rng.normal(0, 0.2, size=3)
            p = curved.closest_point(r)
            t = world_to_chart(p)
            frame = curved.tangent_frame(t)
            resid = r - p
            # residual has no tangential component at the optimum
            tang = frame[:, 0:2].T @ resid
            assert np.max(np.abs(tang)) < 1e-6

    def test_on_surface_point_is_fixed(self, curved):
        t = np.array([1.3, -2.1])
        p = curved.chart_to_world(t)
        np.testing.assert_allclose(curved.closest_point(p), p, atol=1e-9)

    def test_flat_projection(self, flat):
        r = np.array([2.0, -3.0, 5.0])
        np.testing.assert_allclose(flat.closest_point(r),
                                   [2.0, -3.0, 0.0], atol=1e-12)


def test_save_load_roundtrip(curved, tmp_path):
    path = tmp_path / "surf.json"
    save_surface(curved, path)
    loaded = load_surface(path)
    pts = sample_points(curved, 50, seed=10)
    np.testing.assert_allclose(loaded.elevation_many(pts),
                               curved.elevation_many(pts), atol=1e-14)


def test_surface_from_dict_validation(curved, tmp_path):
    path = tmp_path / "surf.json"
    save_surface(curved, path)
    data = json.loads(path.read_text())
    data["knots_u"] = data["knots_u"][::-1]
    with pytest.raises(Exception):
        surface_from_dict(data)


@settings(max_examples=30, deadline=None)
@given(st.floats(-8.0, 8.0), st.floats(-8.0, 8.0), st.integers(0, 10 ** 6))
def test_property_frame_orthonormal_random_surfaces(u, v, seed):
    surface = make_random_surface(seed % 50, amplitude=1.2)
    R = surface.tangent_frame(np.array([u, v]))
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
    g = surface.gradient(np.array([u, v]))
    n = np.array([-g[0], -g[1], 1.0])
    n /= np.linalg.norm(n)
    assert np.max(np.abs(R[:, 2] - n)) < 1e-9
