"""Hot numeric kernels.

B-spline design matrices are evaluated at every smoothing, standardization
and quadrature step, so they get a compiled path. Two implementations live
here and must agree to rounding:

* ``design_matrix_numba``: point-by-point de Boor recursion with
  derivatives, compiled by numba.
* ``design_matrix_numpy``: the dense Cox-de Boor triangle vectorized over
  all points at once.

``design_matrix`` dispatches to the numba path unless numba is missing or
the environment variable ``MFCHARTS_DISABLE_NUMBA`` is set to a truthy value
at import time.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get("MFCHARTS_DISABLE_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def _njit(*args, **kwargs):
    if not HAS_NUMBA:
        return lambda f: f
    return numba.njit(*args, **kwargs)


@_njit(cache=True)
def _find_span(knots, degree, n_basis, x):
    if x >= knots[n_basis]:
        return n_basis - 1
    lo = degree
    hi = n_basis
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


@_njit(cache=True)
def _ders_basis_funs(span, x, degree, n_deriv, knots, out):
    # NURBS-book style derivative recursion; out has shape (n_deriv+1, degree+1)
    p = degree
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    a = np.zeros((2, p + 1))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    for j in range(p + 1):
        out[0, j] = ndu[j, p]
    for r in range(p + 1):
        s1 = 0
        s2 = 1
        a[:, :] = 0.0
        a[0, 0] = 1.0
        for k in range(1, n_deriv + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            out[k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, n_deriv + 1):
        for j in range(p + 1):
            out[k, j] *= fac
        fac *= p - k


@_njit(cache=True)
def design_matrix_numba(knots, degree, x, deriv):
    n_basis = knots.shape[0] - degree - 1
    g = x.shape[0]
    z = np.zeros((g, n_basis))
    work = np.zeros((deriv + 1, degree + 1))
    for i in range(g):
        span = _find_span(knots, degree, n_basis, x[i])
        if deriv > degree:
            continue
        _ders_basis_funs(span, x[i], degree, deriv, knots, work)
        for j in range(degree + 1):
            z[i, span - degree + j] = work[deriv, j]
    return z


def _cox_de_boor(knots, degree, x):
    n_knots = knots.shape[0]
    last = int(np.nonzero(knots[:-1] < knots[1:])[0][-1])  # last non-empty interval
    b = ((knots[:-1][None, :] <= x[:, None]) & (x[:, None] < knots[1:][None, :])).astype(float)
    at_end = x >= knots[last + 1]
    b[at_end, :] = 0.0
    b[at_end, last] = 1.0
    for q in range(1, degree + 1):
        n_fun = n_knots - q - 1
        t_k = knots[:n_fun]
        t_kq = knots[q : q + n_fun]
        t_k1 = knots[1 : 1 + n_fun]
        t_kq1 = knots[q + 1 : q + 1 + n_fun]
        den1 = t_kq - t_k
        den2 = t_kq1 - t_k1
        w1 = np.divide(x[:, None] - t_k, den1, out=np.zeros((x.size, n_fun)), where=den1 > 0)
        w2 = np.divide(t_kq1 - x[:, None], den2, out=np.zeros((x.size, n_fun)), where=den2 > 0)
        b = w1 * b[:, :n_fun] + w2 * b[:, 1 : n_fun + 1]
    return b


def _derivative_map(knots, q):
    # maps degree-(q-1) values to first derivatives of the degree-q functions
    n_knots = knots.shape[0]
    n_hi = n_knots - q - 1
    d = np.zeros((n_hi + 1, n_hi))
    for k in range(n_hi):
        den1 = knots[k + q] - knots[k]
        den2 = knots[k + q + 1] - knots[k + 1]
        if den1 > 0:
            d[k, k] += q / den1
        if den2 > 0:
            d[k + 1, k] -= q / den2
    return d


def design_matrix_numpy(knots, degree, x, deriv):
    knots = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    n_basis = knots.shape[0] - degree - 1
    if deriv > degree:
        return np.zeros((x.size, n_basis))
    z = _cox_de_boor(knots, degree - deriv, x)
    for q in range(degree - deriv + 1, degree + 1):
        z = z @ _derivative_map(knots, q)
    return z


def design_matrix(knots, degree, x, deriv=0):
    """Evaluate all B-splines (or a derivative of them) at the points ``x``.

    Returns a ``(len(x), n_basis)`` array. Points are assumed to lie in the
    closed basis domain; callers validate that.
    """
    knots = np.ascontiguousarray(knots, dtype=float)
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if USE_NUMBA:
        return design_matrix_numba(knots, int(degree), x, int(deriv))
    return design_matrix_numpy(knots, int(degree), x, int(deriv))
