"""Error-state propagation and correction machinery."""
import numpy as np
import pytest

from meskf import (FilterState, OdometryInput, OutOfChartError,
                   RobotExtrinsics, SingularUpdateError, correct,
                   error_jacobians, propagate, robot_rotation, wrap_angle)
from meskf.core import heading_rotation_2d, joseph_update

from conftest import random_spd


def odom(vx=1.0, vy=0.0, w=0.2, sv=1e-4, sw=1e-5):
    return OdometryInput(np.array([vx, vy]), w, np.eye(2) * sv, sw)


def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle(0.3), 0.3)
    np.testing.assert_allclose(wrap_angle(np.pi + 0.1), -np.pi + 0.1,
                               atol=1e-12)
    np.testing.assert_allclose(wrap_angle(-np.pi - 0.1), np.pi - 0.1,
                               atol=1e-12)
    np.testing.assert_allclose(wrap_angle(np.array([4 * np.pi, -4 * np.pi])),
                               [0.0, 0.0], atol=1e-12)


def test_propagate_flat_matches_unicycle(flat):
    # on a flat surface the model reduces to planar dead reckoning
    s = FilterState(np.array([1.0, 2.0]), 0.5, np.eye(3) * 1e-4)
    dt = 0.1
    o = odom(vx=1.2, vy=-0.3, w=0.4)
    s2 = propagate(flat, s, o, dt)
    R = heading_rotation_2d(0.5)
    np.testing.assert_allclose(s2.t_R, s.t_R + R @ o.v_m * dt, atol=1e-12)
    np.testing.assert_allclose(s2.gamma_R, 0.5 + 0.4 * dt, atol=1e-12)


def test_jacobians_flat_analytic(flat):
    # flat surface: F and G have closed forms
    g = 0.7
    dt = 0.05
    s = FilterState(np.array([0.0, 0.0]), g, np.eye(3) * 1e-4)
    o = odom(vx=1.0, vy=0.5, w=0.0)
    F, G, frame2 = error_jacobians(flat, s, o, dt)
    R = heading_rotation_2d(g)
    dR = np.array([[-np.sin(g), -np.cos(g)], [np.cos(g), -np.sin(g)]])
    F_ref = np.eye(3)
    F_ref[0:2, 2] = dR @ o.v_m * dt
    np.testing.assert_allclose(F, F_ref, atol=1e-6)
    np.testing.assert_allclose(np.abs(G[0:2, 0:2]), np.abs(R * dt),
                               atol=1e-12)
    np.testing.assert_allclose(G[2, 2], dt)
    np.testing.assert_allclose(frame2, np.eye(2), atol=1e-12)


def test_propagate_grows_covariance(curved):
    s = FilterState(np.array([0.5, -0.5]), 0.2, np.eye(3) * 1e-6)
    s2 = propagate(curved, s, odom(), 0.05)
    w1 = np.linalg.eigvalsh(s.P_x)
    w2 = np.linalg.eigvalsh(s2.P_x)
    assert w2[0] >= w1[0] - 1e-15
    assert np.trace(s2.P_x) > np.trace(s.P_x)


def test_propagate_rejects_bad_dt(flat):
    s = FilterState(np.zeros(2), 0.0, np.eye(3) * 1e-4)
    with pytest.raises(ValueError):
        propagate(flat, s, odom(), 0.0)


def test_propagate_out_of_chart(curved):
    (ulo, uhi), _ = curved.domain
    s = FilterState(np.array([uhi - 0.01, 0.0]), 0.0, np.eye(3) * 1e-4)
    with pytest.raises(OutOfChartError):
        propagate(curved, s, odom(vx=10.0), 0.5)


def test_correct_zero_innovation_keeps_mean(flat, state):
    H = np.eye(3)
    s2 = correct(state, np.zeros(3), H, np.eye(3) * 0.01)
    np.testing.assert_allclose(s2.t_R, state.t_R, atol=1e-14)
    np.testing.assert_allclose(s2.gamma_R, state.gamma_R, atol=1e-14)
    assert np.trace(s2.P_x) < np.trace(state.P_x)


def test_correct_matches_textbook_kalman(state):
    # single-row update cross-checked against the standard form
    H = np.array([[1.0, 0.0, 0.0]])
    R = np.array([[0.01]])
    y = np.array([0.2])
    P = state.P_x
    S = H @ P @ H.T + R
    K = P @ H.T @ np.linalg.inv(S)
    dx = (K @ y).ravel()
    s2 = correct(state, y, H, R)
    np.testing.assert_allclose(s2.t_R, state.t_R + dx[0:2], atol=1e-12)
    np.testing.assert_allclose(s2.gamma_R, state.gamma_R + dx[2], atol=1e-12)
    IKH = np.eye(3) - K @ H
    P_ref = IKH @ P @ IKH.T + K @ R @ K.T
    np.testing.assert_allclose(s2.P_x, P_ref, atol=1e-12)


def test_correct_singular_raises(state):
    H = np.array([[1.0, 0.0, 0.0]])
    with pytest.raises(SingularUpdateError):
        correct(state, np.array([0.1]), H, np.array([[-1.0]]))


def test_correct_wraps_heading(flat):
    s = FilterState(np.zeros(2), np.pi - 0.01, np.eye(3))
    s2 = correct(s, np.array([0.05]), np.array([[0.0, 0.0, 1.0]]),
                 np.array([[1e-8]]))
    assert -np.pi < s2.gamma_R <= np.pi
    np.testing.assert_allclose(s2.gamma_R, wrap_angle(np.pi - 0.01 + 0.05),
                               atol=1e-4)


def test_joseph_update_never_increases_diagonals():
    rng = np.random.default_rng(11)
    for _ in range(200):
        P = random_spd(rng, 3, 0.1)
        m = rng.integers(1, 4)
        H = rng.standard_normal((m, 3))
        R = random_spd(rng, m, 0.01)
        ok, dx, P2 = joseph_update(P, H, R, np.zeros(m))
        assert ok
        assert np.all(np.diag(P2) <= np.diag(P) + 1e-12)


def test_covariance_psd_through_random_cycles(curved):
    # long alternating propagate/correct chain stays symmetric PSD
    rng = np.random.default_rng(12)
    s = FilterState(np.zeros(2), 0.0, np.eye(3) * 0.01)
    for k in range(10_000):
        if k % 2 == 0:
            o = OdometryInput(rng.normal(0, 0.5, 2), rng.normal(0, 0.3),
                              np.eye(2) * 1e-4, 1e-5)
            try:
                s = propagate(curved, s, o, 0.02)
            except OutOfChartError:
                s = FilterState(np.zeros(2), s.gamma_R, s.P_x)
        else:
            m = int(rng.integers(1, 4))
            H = rng.standard_normal((m, 3))
            R = random_spd(rng, m, 0.01)
            s = correct(s, rng.normal(0, 0.05, m), H, R)
        assert np.max(np.abs(s.P_x - s.P_x.T)) < 1e-12
        assert np.linalg.eigvalsh(s.P_x)[0] >= -1e-9


def test_robot_rotation_flat_is_heading(flat):
    s = FilterState(np.array([1.0, 1.0]), 0.6, np.eye(3))
    R = robot_rotation(flat, s)
    c, ss = np.cos(0.6), np.sin(0.6)
    np.testing.assert_allclose(R, [[c, -ss, 0], [ss, c, 0], [0, 0, 1]],
                               atol=1e-12)


def test_extrinsics_identity():
    e = RobotExtrinsics.identity()
    np.testing.assert_allclose(e.r_RS, np.zeros(3))
    np.testing.assert_allclose(e.q_RS, [1, 0, 0, 0])
