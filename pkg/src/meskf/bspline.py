"""Vectorized clamped b-spline basis evaluation (Cox-de Boor).

All routines accept arrays of query points and return the non-vanishing
basis values together with the knot span indices so that tensor-product
surfaces can gather their control points with fancy indexing.
"""

import numpy as np


def find_spans(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """Knot span index i such that knots[i] <= x < knots[i+1].

    The last valid span is returned for x at the right end of the domain,
    matching the clamped-spline convention.
    """
    lo = degree
    hi = len(knots) - degree - 2
    spans = np.searchsorted(knots, x, side="right") - 1
    return np.clip(spans, lo, hi)


def basis_values(knots: np.ndarray, degree: int, spans: np.ndarray,
                 x: np.ndarray) -> np.ndarray:
    """Non-vanishing basis functions N_{span-degree+j,degree}(x), j=0..degree.

    Vectorized form of the standard triangular recurrence; returns an
    array of shape (len(x), degree + 1).
    """
    n = x.shape[0]
    vals = np.ones((n, degree + 1))
    left = np.empty((n, degree + 1))
    right = np.empty((n, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - x
        saved = np.zeros(n)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = vals[:, r] / denom
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    return vals


def basis_and_derivatives(knots: np.ndarray, degree: int, spans: np.ndarray,
                          x: np.ndarray):
    """Basis values and first derivatives in one recurrence pass.

    The degree-1 intermediates of the triangular recurrence are the
    lower-degree basis functions, from which the analytic derivative
    N'_{i,p} = p (N_{i,p-1}/(t_{i+p}-t_i) - N_{i+1,p-1}/(t_{i+p+1}-t_{i+1}))
    follows. Returns (values, derivatives), each (len(x), degree + 1).
    """
    n = x.shape[0]
    vals = np.ones((n, degree + 1))
    left = np.empty((n, degree + 1))
    right = np.empty((n, degree + 1))
    lower = None
    for j in range(1, degree + 1):
        left[:, j] = x - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - x
        if j == degree:
            lower = vals[:, :degree].copy()
        saved = np.zeros(n)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = vals[:, r] / denom
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved

    ders = np.empty((n, degree + 1))
    offs = np.arange(degree + 1)
    i = spans[:, None] - degree + offs          # basis indices, (n, p+1)
    dt_lo = knots[i + degree] - knots[i]
    dt_hi = knots[i + degree + 1] - knots[i + 1]
    # lower-degree values aligned with i (zero outside their support)
    lo = np.zeros((n, degree + 2))
    lo[:, 1:degree + 1] = lower
    with np.errstate(divide="ignore", invalid="ignore"):
        term_lo = np.where(dt_lo > 0, lo[:, :degree + 1] / dt_lo, 0.0)
        term_hi = np.where(dt_hi > 0, lo[:, 1:] / dt_hi, 0.0)
    ders[:] = degree * (term_lo - term_hi)
    return vals, ders


def tensor_eval(control: np.ndarray,
                knots_u: np.ndarray, degree_u: int,
                knots_v: np.ndarray, degree_v: int,
                u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Evaluate sum_ij P_ij N_i(u) N_j(v) at paired points (u, v)."""
    su = find_spans(knots_u, degree_u, u)
    sv = find_spans(knots_v, degree_v, v)
    bu = basis_values(knots_u, degree_u, su, u)
    bv = basis_values(knots_v, degree_v, sv, v)
    iu = su[:, None] - degree_u + np.arange(degree_u + 1)
    iv = sv[:, None] - degree_v + np.arange(degree_v + 1)
    cp = control[iu[:, :, None], iv[:, None, :]]
    return np.einsum("ni,nij,nj->n", bu, cp, bv)
