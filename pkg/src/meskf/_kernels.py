"""Optional numba kernel for the fused surface evaluation.

The filters call the surface with tiny batches (5 to 7 points) at every
step, where numpy's per-op dispatch overhead dominates. A jitted scalar
Cox-de Boor loop removes that overhead. Everything here mirrors the
pure-numpy path in ``surface._eval_fused_numpy``; if numba is missing
the package falls back to that path with identical results.
"""

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:              # pragma: no cover - numba is preinstalled
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True)
def _basis_ders_1d(knots, degree, x, vals, ders, lower, left, right):
    """Span index plus non-vanishing basis values and derivatives at x."""
    lo = degree
    hi = len(knots) - degree - 2
    # binary search for the span: knots[span] <= x < knots[span + 1]
    a, b = 0, len(knots)
    while a < b:
        mid = (a + b) // 2
        if knots[mid] <= x:
            a = mid + 1
        else:
            b = mid
    span = a - 1
    if span < lo:
        span = lo
    elif span > hi:
        span = hi

    vals[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        if j == degree:
            for r in range(degree):
                lower[r] = vals[r]
        saved = 0.0
        for r in range(j):
            temp = vals[r] / (right[r + 1] + left[j - r])
            vals[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        vals[j] = saved

    for off in range(degree + 1):
        i = span - degree + off
        term = 0.0
        dt_lo = knots[i + degree] - knots[i]
        if off >= 1 and dt_lo > 0.0:
            term += lower[off - 1] / dt_lo
        dt_hi = knots[i + degree + 1] - knots[i + 1]
        if off <= degree - 1 and dt_hi > 0.0:
            term -= lower[off] / dt_hi
        ders[off] = degree * term
    return span


@njit(cache=True)
def predict_pose_points(knots_u, degree_u, knots_v, degree_v, cp,
                        u_lo, u_hi, v_lo, v_hi,
                        ts, gammas, r_RS, q_RS):
    """Predicted sensor positions and orientations for a state batch.

    Scalar-loop form of the measurement-model geometry: surface point,
    tangent frame, lever arm, and the composed quaternion
    q_frame ⊗ q_z(gamma) ⊗ q_RS per state. Returns (ok, pos, quats)
    with ok False when any chart point leaves the domain.
    """
    n = ts.shape[0]
    pos = np.empty((n, 3))
    quats = np.empty((n, 4))
    bu = np.empty(degree_u + 1)
    du = np.empty(degree_u + 1)
    lu = np.empty(degree_u)
    left_u = np.empty(degree_u + 1)
    right_u = np.empty(degree_u + 1)
    bv = np.empty(degree_v + 1)
    dv = np.empty(degree_v + 1)
    lv = np.empty(degree_v)
    left_v = np.empty(degree_v + 1)
    right_v = np.empty(degree_v + 1)
    has_lever = r_RS[0] != 0.0 or r_RS[1] != 0.0 or r_RS[2] != 0.0
    has_qrs = (q_RS[0] != 1.0 or q_RS[1] != 0.0
               or q_RS[2] != 0.0 or q_RS[3] != 0.0)
    for k in range(n):
        u = ts[k, 0]
        v = ts[k, 1]
        if not (u_lo <= u <= u_hi and v_lo <= v <= v_hi):
            return False, pos, quats
        su = _basis_ders_1d(knots_u, degree_u, u, bu, du, lu,
                            left_u, right_u)
        sv = _basis_ders_1d(knots_v, degree_v, v, bv, dv, lv,
                            left_v, right_v)
        z = 0.0
        gx = 0.0
        gy = 0.0
        for a in range(degree_u + 1):
            row = cp[su - degree_u + a]
            wb = 0.0
            wd = 0.0
            for b in range(degree_v + 1):
                c = row[sv - degree_v + b]
                wb += c * bv[b]
                wd += c * dv[b]
            z += bu[a] * wb
            gx += du[a] * wb
            gy += bu[a] * wd

        alpha = np.arctan(gy)
        ca = np.cos(alpha)
        sa = np.sin(alpha)
        beta = -np.arctan(gx * ca)
        cb = np.cos(beta)
        sb = np.sin(beta)
        g = gammas[k]

        px = u
        py = v
        pz = z
        if has_lever:
            cg = np.cos(g)
            sg = np.sin(g)
            # Rz(gamma) r_RS, then the frame R_x(alpha) R_y(beta)
            rx = cg * r_RS[0] - sg * r_RS[1]
            ry = sg * r_RS[0] + cg * r_RS[1]
            rz = r_RS[2]
            px += cb * rx + sb * rz
            py += sa * sb * rx + ca * ry - sa * cb * rz
            pz += -ca * sb * rx + sa * ry + ca * cb * rz
        pos[k, 0] = px
        pos[k, 1] = py
        pos[k, 2] = pz

        # frame quaternion in closed form: q_x(alpha) ⊗ q_y(beta)
        ca2 = np.cos(0.5 * alpha)
        sa2 = np.sin(0.5 * alpha)
        cb2 = np.cos(0.5 * beta)
        sb2 = np.sin(0.5 * beta)
        w1 = ca2 * cb2
        x1 = sa2 * cb2
        y1 = ca2 * sb2
        z1 = sa2 * sb2
        # ⊗ q_z(gamma)
        cg2 = np.cos(0.5 * g)
        sg2 = np.sin(0.5 * g)
        qw = w1 * cg2 - z1 * sg2
        qx = x1 * cg2 + y1 * sg2
        qy = y1 * cg2 - x1 * sg2
        qz = w1 * sg2 + z1 * cg2
        if has_qrs:
            w2, x2, y2, z2 = q_RS[0], q_RS[1], q_RS[2], q_RS[3]
            qw, qx, qy, qz = (
                qw * w2 - qx * x2 - qy * y2 - qz * z2,
                qw * x2 + qx * w2 + qy * z2 - qz * y2,
                qw * y2 - qx * z2 + qy * w2 + qz * x2,
                qw * z2 + qx * y2 - qy * x2 + qz * w2,
            )
        norm = np.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        s = 1.0 / norm if qw >= 0.0 else -1.0 / norm
        quats[k, 0] = qw * s
        quats[k, 1] = qx * s
        quats[k, 2] = qy * s
        quats[k, 3] = qz * s
    return True, pos, quats


@njit(cache=True)
def _perturbed_batch(t, gamma, e):
    """Nominal state then +/- perturbations of each error coordinate."""
    ts = np.empty((7, 2))
    gs = np.full(7, gamma)
    for k in range(7):
        ts[k, 0] = t[0]
        ts[k, 1] = t[1]
    ts[1, 0] += e
    ts[2, 0] -= e
    ts[3, 1] += e
    ts[4, 1] -= e
    gs[5] += e
    gs[6] -= e
    return ts, gs


@njit(cache=True)
def pose_residual_jacobian(knots_u, degree_u, knots_v, degree_v, cp,
                           u_lo, u_hi, v_lo, v_hi,
                           t, gamma, r_RS, q_RS, z_p, z_q, e):
    """Six-row pose residual and central-difference Jacobian.

    Returns (ok, y0, H); ok False when a perturbed chart point leaves
    the domain.
    """
    y0 = np.zeros(6)
    H = np.zeros((6, 3))
    ts, gs = _perturbed_batch(t, gamma, e)
    ok, pos, quats = predict_pose_points(
        knots_u, degree_u, knots_v, degree_v, cp,
        u_lo, u_hi, v_lo, v_hi, ts, gs, r_RS, q_RS)
    if not ok:
        return False, y0, H
    y = np.empty((7, 6))
    for k in range(7):
        y[k, 0] = z_p[0] - pos[k, 0]
        y[k, 1] = z_p[1] - pos[k, 1]
        y[k, 2] = z_p[2] - pos[k, 2]
        # error quaternion conj(q_pred) ⊗ z_q, sign-safe small angle
        w1 = quats[k, 0]
        x1 = -quats[k, 1]
        y1 = -quats[k, 2]
        z1 = -quats[k, 3]
        w2, x2, y2, z2 = z_q[0], z_q[1], z_q[2], z_q[3]
        ew = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
        ex = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
        ey = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
        ez = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2
        s = 2.0 if ew >= 0.0 else -2.0
        y[k, 3] = s * ex
        y[k, 4] = s * ey
        y[k, 5] = s * ez
    for i in range(6):
        y0[i] = y[0, i]
        for j in range(3):
            H[i, j] = -(y[1 + 2 * j, i] - y[2 + 2 * j, i]) / (2.0 * e)
    return True, y0, H


@njit(cache=True)
def range_residual_jacobian(knots_u, degree_u, knots_v, degree_v, cp,
                            u_lo, u_hi, v_lo, v_hi,
                            t, gamma, r_RS, q_RS, anchor, e):
    """Predicted distances for the perturbed batch and the 1x3 Jacobian.

    Returns (ok, d0, H) with d0 the nominal predicted distance.
    """
    H = np.zeros((1, 3))
    ts, gs = _perturbed_batch(t, gamma, e)
    ok, pos, _ = predict_pose_points(
        knots_u, degree_u, knots_v, degree_v, cp,
        u_lo, u_hi, v_lo, v_hi, ts, gs, r_RS, q_RS)
    if not ok:
        return False, 0.0, H
    d = np.empty(7)
    for k in range(7):
        dx = pos[k, 0] - anchor[0]
        dy = pos[k, 1] - anchor[1]
        dz = pos[k, 2] - anchor[2]
        d[k] = np.sqrt(dx * dx + dy * dy + dz * dz)
    for j in range(3):
        H[0, j] = (d[1 + 2 * j] - d[2 + 2 * j]) / (2.0 * e)
    return True, d[0], H


@njit(cache=True)
def joseph_core(P, H, R, inn):
    """Kalman gain, error injection, Joseph-form covariance.

    Returns (ok, dx, P_new); ok is False when the innovation covariance
    is singular or has condition number above 1e12.
    """
    P = np.ascontiguousarray(P)
    H = np.ascontiguousarray(H)
    R = np.ascontiguousarray(R)
    S = H @ P @ np.ascontiguousarray(H.T) + R
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    if w[0] <= 0.0 or w[-1] > 1e12 * w[0]:
        return False, np.zeros(P.shape[0]), P
    K = np.ascontiguousarray(np.linalg.solve(S, H @ P).T)
    dx = K @ inn
    IKH = np.eye(P.shape[0]) - K @ H
    P_new = (IKH @ P @ np.ascontiguousarray(IKH.T)
             + K @ R @ np.ascontiguousarray(K.T))
    return True, dx, 0.5 * (P_new + P_new.T)


@njit(cache=True)
def fused_surface_eval(knots_u, degree_u, knots_v, degree_v, cp, t):
    """Elevation and gradient of the tensor-product spline at (N, 2) t."""
    n = t.shape[0]
    z = np.empty(n)
    gx = np.empty(n)
    gy = np.empty(n)
    bu = np.empty(degree_u + 1)
    du = np.empty(degree_u + 1)
    lu = np.empty(degree_u)
    left_u = np.empty(degree_u + 1)
    right_u = np.empty(degree_u + 1)
    bv = np.empty(degree_v + 1)
    dv = np.empty(degree_v + 1)
    lv = np.empty(degree_v)
    left_v = np.empty(degree_v + 1)
    right_v = np.empty(degree_v + 1)
    for k in range(n):
        su = _basis_ders_1d(knots_u, degree_u, t[k, 0],
                            bu, du, lu, left_u, right_u)
        sv = _basis_ders_1d(knots_v, degree_v, t[k, 1],
                            bv, dv, lv, left_v, right_v)
        acc_z = 0.0
        acc_gx = 0.0
        acc_gy = 0.0
        for a in range(degree_u + 1):
            row = cp[su - degree_u + a]
            wb = 0.0
            wd = 0.0
            for b in range(degree_v + 1):
                c = row[sv - degree_v + b]
                wb += c * bv[b]
                wd += c * dv[b]
            acc_z += bu[a] * wb
            acc_gx += du[a] * wb
            acc_gy += bu[a] * wd
        z[k] = acc_z
        gx[k] = acc_gx
        gy[k] = acc_gy
    return z, gx, gy
