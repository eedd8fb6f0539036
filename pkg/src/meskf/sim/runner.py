"""Trial execution and Monte-Carlo metric aggregation.

Every filter variant is scored in the same evaluation space: chart
position error (m) and heading error (rad). The constrained 3-D
baseline is mapped into that space through the chart and the tangent
frame decomposition so the comparison is over shared observables.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .. import baseline as bl
from .. import projection as prj
from .. import sensors3d as s3d
from ..core import FilterState, RobotExtrinsics, propagate, wrap_angle
from ..errors import (DegenerateGeometryError, DegenerateSamplingError,
                      MeskfError, NoIntersectionError, OutOfChartError,
                      SingularUpdateError)
from ..surface import BSplineSurface
from .sensors import MeasurementStreams
from .trajectory import GroundTruth

FILTER_KINDS = ("M-ESEKF", "MP-ESEKF", "C-ESEKF")
DIVERGENCE_LIMIT_M = 10.0


@dataclass
class InitialUncertainty:
    """Standard deviations used to seed the initial estimate and P0."""
    pos_std: float = 0.05     # chart position, m
    head_std: float = 0.02    # heading, rad
    z_std: float = 0.05       # baseline elevation, m
    rp_std: float = 0.02      # baseline roll/pitch, rad


@dataclass
class TrialResult:
    errors: np.ndarray        # (K+1, 3) chart position + heading error
    covariances: np.ndarray   # (K+1, 3, 3) in the evaluation space
    timings: dict             # correction type -> list of seconds
    diverged: bool
    diverged_step: int | None = None


@dataclass
class TrialMetrics:
    """Per-step Monte-Carlo metrics with chi-square consistency bounds."""
    times: np.ndarray
    rmse_pos: np.ndarray
    rmse_head: np.ndarray
    anees: np.ndarray         # combined, m = 3
    anees_pos: np.ndarray     # position only, m = 2
    anees_head: np.ndarray    # heading only, m = 1
    anees_bounds: tuple       # (lo, hi) for the combined ANEES
    anees_bounds_pos: tuple
    anees_bounds_head: tuple
    n_trials: int
    n_excluded: int
    timing_rows: list         # (trial, correction_type, mean_us, p99_us)

    @property
    def exclusion_rate(self):
        return self.n_excluded / max(self.n_trials, 1)


def chi2_quantile_wh(p: float, dof: float) -> float:
    """Wilson-Hilferty chi-square quantile approximation."""
    z = ndtri(p)
    a = 2.0 / (9.0 * dof)
    return dof * (1.0 - a + z * np.sqrt(a)) ** 3


def anees_bounds(n_trials: int, m: int, confidence: float = 0.99):
    dof = n_trials * m
    alpha = 0.5 * (1.0 - confidence)
    return (chi2_quantile_wh(alpha, dof) / dof,
            chi2_quantile_wh(1.0 - alpha, dof) / dof)


def _timed(timings, key, fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    timings.setdefault(key, []).append(time.perf_counter() - start)
    return out


def _init_manifold(truth: GroundTruth, init: InitialUncertainty,
                   noise: np.ndarray) -> FilterState:
    P0 = np.diag([init.pos_std ** 2, init.pos_std ** 2, init.head_std ** 2])
    t0 = truth.chart[0] + init.pos_std * noise[0:2]
    g0 = truth.gamma[0] + init.head_std * noise[2]
    return FilterState(t0, g0, P0)


def _run_manifold(surface, truth, streams, projected, sampling,
                  extrinsics, init) -> TrialResult:
    state = _init_manifold(truth, init, streams.initial_state_noise)
    n = truth.n_steps
    errors = np.zeros((n + 1, 3))
    covs = np.zeros((n + 1, 3, 3))
    timings = {}

    def record(k, s):
        errors[k, 0:2] = s.t_R - truth.chart[k]
        errors[k, 2] = wrap_angle(s.gamma_R - truth.gamma[k])
        covs[k] = s.P_x

    record(0, state)
    for k in range(n):
        try:
            state = propagate(surface, state, streams.odometry[k], truth.dt)
            step = k + 1
            if step in streams.pose_events:
                meas = streams.pose_events[step]
                if projected:
                    def proj_pose(st):
                        p = prj.project_position(
                            surface, meas.z_p, meas.P_m[0:3, 0:3],
                            extrinsics, st)
                        st = prj.projected_position_update(st, surface, p)
                        return s3d.orientation_update(
                            st, surface, extrinsics, meas)
                    state = _timed(timings, "projected_position",
                                   proj_pose, state)
                else:
                    state = _timed(timings, "pose", s3d.pose_update,
                                   state, surface, extrinsics, meas)
            for meas in streams.range_events.get(step, ()):
                if projected:
                    def proj_range(st):
                        try:
                            pr = prj.project_range(
                                surface, meas.z_d, meas.R_d, meas.r_A,
                                extrinsics, st, sampling)
                            return prj.projected_range_update(
                                st, surface, pr)
                        except (NoIntersectionError,
                                DegenerateSamplingError,
                                DegenerateGeometryError):
                            return s3d.range_update(
                                st, surface, extrinsics, meas)
                    state = _timed(timings, "projected_range",
                                   proj_range, state)
                else:
                    state = _timed(timings, "range", s3d.range_update,
                                   state, surface, extrinsics, meas)
        except (OutOfChartError, SingularUpdateError, MeskfError):
            return TrialResult(errors, covs, timings, True, k + 1)
        record(step, state)
        if np.linalg.norm(errors[step, 0:2]) > DIVERGENCE_LIMIT_M:
            return TrialResult(errors, covs, timings, True, step)
    return TrialResult(errors, covs, timings, False)


def _run_baseline(surface, truth, streams, pseudo, extrinsics,
                  init) -> TrialResult:
    from .. import quat
    noise = streams.initial_state_noise
    p0 = surface.chart_to_world(truth.chart[0])
    p0 = p0 + np.array([init.pos_std * noise[0], init.pos_std * noise[1],
                        init.z_std * noise[3]])
    frame0 = surface.tangent_frame(truth.chart[0])
    q_true = quat.from_matrix(frame0 @ quat.to_matrix(
        quat.z_rotation(truth.gamma[0])))
    dq = quat.from_rotvec(np.array([init.rp_std * noise[4],
                                    init.rp_std * noise[5],
                                    init.head_std * noise[2]]))
    P0 = np.diag([init.pos_std ** 2, init.pos_std ** 2, init.z_std ** 2,
                  init.rp_std ** 2, init.rp_std ** 2, init.head_std ** 2])
    state = bl.FullPoseState(p0, quat.multiply(q_true, dq), P0)

    n = truth.n_steps
    errors = np.zeros((n + 1, 3))
    covs = np.zeros((n + 1, 3, 3))
    timings = {}
    pseudo_every = max(int(round(1.0 / (pseudo.rate * truth.dt))), 1)

    def record(k, s):
        x_eval, P_eval = bl.chart_errors(s, surface)
        errors[k, 0:2] = x_eval[0:2] - truth.chart[k]
        errors[k, 2] = wrap_angle(x_eval[2] - truth.gamma[k])
        covs[k] = P_eval

    record(0, state)
    for k in range(n):
        try:
            state = bl.propagate_3d(state, streams.odometry[k], truth.dt)
            step = k + 1
            if step % pseudo_every == 0:
                state = _timed(timings, "pseudo", bl.pseudo_update,
                               state, surface, pseudo)
            if step in streams.pose_events:
                state = _timed(timings, "pose", bl.pose_update_3d,
                               state, extrinsics, streams.pose_events[step])
            for meas in streams.range_events.get(step, ()):
                state = _timed(timings, "range", bl.range_update_3d,
                               state, extrinsics, meas)
        except (OutOfChartError, SingularUpdateError, MeskfError):
            return TrialResult(errors, covs, timings, True, k + 1)
        record(step, state)
        if np.linalg.norm(errors[step, 0:2]) > DIVERGENCE_LIMIT_M:
            return TrialResult(errors, covs, timings, True, step)
    return TrialResult(errors, covs, timings, False)


def run_trial(surface: BSplineSurface, truth: GroundTruth,
              streams: MeasurementStreams, filter_kind: str,
              sampling=None, pseudo=None, extrinsics=None,
              init=None) -> TrialResult:
    """Event-driven execution of one trial with the selected filter."""
    if filter_kind not in FILTER_KINDS:
        raise ValueError(f"unknown filter kind {filter_kind!r}")
    extrinsics = extrinsics or RobotExtrinsics.identity()
    init = init or InitialUncertainty()
    if filter_kind == "C-ESEKF":
        pseudo = pseudo or bl.PseudoMeasurementConfig()
        return _run_baseline(surface, truth, streams, pseudo, extrinsics,
                             init)
    projected = filter_kind == "MP-ESEKF"
    sampling = sampling or prj.SamplingConfig()
    return _run_manifold(surface, truth, streams, projected, sampling,
                         extrinsics, init)


def metrics_from_arrays(times: np.ndarray, errors: np.ndarray,
                        covariances: np.ndarray, diverged: np.ndarray,
                        timing_rows: list) -> TrialMetrics:
    """RMSE_k and ANEES_k from stacked per-trial arrays.

    Diverged trials are excluded from the averages and reported through
    the exclusion rate.
    """
    keep = ~np.asarray(diverged, dtype=bool)
    n_steps = len(times)
    if np.any(keep):
        e = errors[keep]                                # (N, K+1, 3)
        P = covariances[keep]                           # (N, K+1, 3, 3)
        rmse_pos = np.sqrt(np.mean(np.sum(e[:, :, 0:2] ** 2, axis=2), axis=0))
        rmse_head = np.sqrt(np.mean(e[:, :, 2] ** 2, axis=0))
        Pinv = np.linalg.inv(P)
        nees = np.einsum("nki,nkij,nkj->nk", e, Pinv, e)
        anees = np.mean(nees, axis=0) / 3.0
        Pp = P[:, :, 0:2, 0:2]
        nees_p = np.einsum("nki,nkij,nkj->nk", e[:, :, 0:2],
                           np.linalg.inv(Pp), e[:, :, 0:2])
        anees_pos = np.mean(nees_p, axis=0) / 2.0
        anees_head = np.mean(e[:, :, 2] ** 2 / P[:, :, 2, 2], axis=0)
    else:
        rmse_pos = rmse_head = np.full(n_steps, np.nan)
        anees = anees_pos = anees_head = np.full(n_steps, np.nan)

    n_kept = max(int(np.sum(keep)), 1)
    return TrialMetrics(
        times=times,
        rmse_pos=rmse_pos, rmse_head=rmse_head,
        anees=anees, anees_pos=anees_pos, anees_head=anees_head,
        anees_bounds=anees_bounds(n_kept, 3),
        anees_bounds_pos=anees_bounds(n_kept, 2),
        anees_bounds_head=anees_bounds(n_kept, 1),
        n_trials=len(diverged), n_excluded=int(np.sum(~keep)),
        timing_rows=timing_rows)


def stack_results(results: list):
    """(errors, covariances, diverged, timing_rows) arrays from trials."""
    errors = np.stack([r.errors for r in results])
    covs = np.stack([r.covariances for r in results])
    diverged = np.array([r.diverged for r in results], dtype=bool)
    timing_rows = []
    for i, r in enumerate(results):
        for key, vals in sorted(r.timings.items()):
            arr = np.asarray(vals) * 1e6
            timing_rows.append((i, key, float(np.mean(arr)),
                                float(np.percentile(arr, 99))))
    return errors, covs, diverged, timing_rows


def aggregate_metrics(truth: GroundTruth, results: list) -> TrialMetrics:
    errors, covs, diverged, timing_rows = stack_results(results)
    return metrics_from_arrays(truth.times, errors, covs, diverged,
                               timing_rows)


def monte_carlo(surface, truth, suite, schedule, filter_kind, n_trials,
                seed, sampling=None, pseudo=None, extrinsics=None,
                init=None) -> TrialMetrics:
    """Run N independent trials and aggregate RMSE/ANEES per step."""
    from .sensors import synthesize_measurements
    if n_trials < 1:
        raise ValueError("need at least one trial")
    extrinsics = extrinsics or RobotExtrinsics.identity()
    results = []
    for trial in range(n_trials):
        streams = synthesize_measurements(surface, truth, suite, schedule,
                                          extrinsics, seed, trial)
        results.append(run_trial(surface, truth, streams, filter_kind,
                                 sampling, pseudo, extrinsics, init))
    return aggregate_metrics(truth, results)
