"""Hot numeric kernels: batched positive-root cubic solver and the
variance-profile fixed-point iteration.

Each kernel exists twice, a numba version (``*_jit``) and a vectorised numpy
version (``*_numpy``). The public entry points dispatch on
:data:`xtalk._accel.NUMBA_ENABLED`; both versions perform the same IEEE
operations in the same order per element, so the cubic results agree bitwise
and the fixed point agrees to summation-order rounding.
"""

import math

import numpy as np

from ._accel import NUMBA_ENABLED, njit

CUBIC_MAX_ITER = 400
_EPS = np.finfo(float).eps
_MAX_DOUBLINGS = 1100


# --------------------------------------------------------------------------
# cubic: c3 x^3 + c2 x^2 + c1 x + c0 = 0, c0 < 0, exactly one positive root
# --------------------------------------------------------------------------

@njit
def _cubic_root_scalar(c3, c2, c1, c0, hi, x):
    lo = 0.0
    fhi = ((c3 * hi + c2) * hi + c1) * hi + c0
    k = 0
    while fhi <= 0.0 and k < _MAX_DOUBLINGS:
        hi = 2.0 * hi
        fhi = ((c3 * hi + c2) * hi + c1) * hi + c0
        k += 1
    if not (lo < x < hi):
        x = 0.5 * hi
    for it in range(CUBIC_MAX_ITER):
        f = ((c3 * x + c2) * x + c1) * x + c0
        if f == 0.0:
            return x, it
        if f < 0.0:
            lo = x
        else:
            hi = x
        df = (3.0 * c3 * x + 2.0 * c2) * x + c1
        xn = -1.0
        if df > 0.0:
            xn = x - f / df
        if not (lo < xn < hi):
            if lo > 0.0 and hi > 4.0 * lo:
                xn = math.sqrt(lo * hi)
            else:
                xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 2.0 * _EPS * xn or hi - lo <= 2.0 * _EPS * hi:
            return xn, it + 1
        x = xn
    return x, CUBIC_MAX_ITER


@njit
def cubic_positive_root_jit(c3, c2, c1, c0, hi, x0):
    n = c3.shape[0]
    out = np.empty(n)
    iters = np.empty(n, dtype=np.int64)
    for i in range(n):
        r, k = _cubic_root_scalar(c3[i], c2[i], c1[i], c0[i], hi[i], x0[i])
        out[i] = r
        iters[i] = k
    return out, iters


def cubic_positive_root_numpy(c3, c2, c1, c0, hi, x0):
    c3, c2, c1, c0 = (np.asarray(c, dtype=float) for c in (c3, c2, c1, c0))
    hi = np.array(hi, dtype=float)
    x = np.array(x0, dtype=float)

    def poly(v):
        return ((c3 * v + c2) * v + c1) * v + c0

    fhi = poly(hi)
    for _ in range(_MAX_DOUBLINGS):
        grow = fhi <= 0.0
        if not grow.any():
            break
        hi = np.where(grow, 2.0 * hi, hi)
        fhi = np.where(grow, poly(hi), fhi)

    lo = np.zeros_like(hi)
    x = np.where((lo < x) & (x < hi), x, 0.5 * hi)
    iters = np.full(x.shape, CUBIC_MAX_ITER, dtype=np.int64)
    active = np.ones(x.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for it in range(CUBIC_MAX_ITER):
            f = poly(x)
            hit = active & (f == 0.0)
            iters[hit] = it
            active &= ~hit
            if not active.any():
                break
            lo = np.where(active & (f < 0.0), x, lo)
            hi = np.where(active & (f > 0.0), x, hi)
            df = (3.0 * c3 * x + 2.0 * c2) * x + c1
            xn = np.where(df > 0.0, x - f / df, -1.0)
            bad = ~((lo < xn) & (xn < hi))
            geo = (lo > 0.0) & (hi > 4.0 * lo)
            fallback = np.where(geo, np.sqrt(lo * hi), 0.5 * (lo + hi))
            xn = np.where(bad, fallback, xn)
            done = active & ((np.abs(xn - x) <= 2.0 * _EPS * xn) | (hi - lo <= 2.0 * _EPS * hi))
            iters[done] = it + 1
            x = np.where(active, xn, x)
            active &= ~done
            if not active.any():
                break
    return x, iters


def cubic_positive_root(c3, c2, c1, c0, hi, x0=None):
    """Unique positive root of ``c3 x^3 + c2 x^2 + c1 x + c0`` for each element.

    Requires ``c0 < 0`` and a polynomial with exactly one positive root.
    ``hi`` is an initial upper bracket; it is doubled until the polynomial is
    positive there. Returns ``(roots, iterations)`` as 1-D arrays.
    """
    c3, c2, c1, c0, hi = np.broadcast_arrays(*(np.atleast_1d(np.asarray(c, dtype=float))
                                               for c in (c3, c2, c1, c0, hi)))
    shape = c3.shape
    if x0 is None:
        x0 = 0.5 * hi
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), shape)
    args = [np.ascontiguousarray(a.ravel()) for a in (c3, c2, c1, c0, hi, x0)]
    if NUMBA_ENABLED:
        roots, iters = cubic_positive_root_jit(*args)
    else:
        roots, iters = cubic_positive_root_numpy(*args)
    return roots.reshape(shape), iters.reshape(shape)


def cubic_relative_residual(c3, c2, c1, c0, x):
    """|p(x)| divided by the largest monomial magnitude."""
    x = np.asarray(x, dtype=float)
    terms = np.stack(np.broadcast_arrays(c3 * x**3, c2 * x**2, c1 * x, c0 + 0.0 * x))
    scale = np.max(np.abs(terms), axis=0)
    return np.abs(terms.sum(axis=0)) / np.where(scale > 0, scale, 1.0)


# --------------------------------------------------------------------------
# variance-profile fixed point at z = -1/xi
# --------------------------------------------------------------------------

@njit
def fixed_point_jit(var, xi, alpha, tol, max_iter, init):
    n = var.shape[0]
    inv_xi = 1.0 / xi
    t = np.full(n, init)
    tt = np.full(n, init)
    a = np.empty(n)
    b = np.empty(n)
    resid = np.inf
    for it in range(1, max_iter + 1):
        for i in range(n):
            sa = 0.0
            sb = 0.0
            for j in range(n):
                sa += var[i, j] * tt[j]
                sb += var[j, i] * t[j]
            a[i] = sa / n
            b[i] = sb / n
        resid = 0.0
        for i in range(n):
            tn = 1.0 / (inv_xi * (1.0 + a[i]) + 1.0 / (1.0 + b[i]))
            ttn = 1.0 / (inv_xi * (1.0 + b[i]) + 1.0 / (1.0 + a[i]))
            r1 = abs(tn - t[i]) / max(1.0, tn)
            r2 = abs(ttn - tt[i]) / max(1.0, ttn)
            if r1 > resid:
                resid = r1
            if r2 > resid:
                resid = r2
            t[i] = (1.0 - alpha) * t[i] + alpha * tn
            tt[i] = (1.0 - alpha) * tt[i] + alpha * ttn
        if resid < tol:
            return t, tt, it, resid
    return t, tt, max_iter, resid


def fixed_point_numpy(var, xi, alpha, tol, max_iter, init):
    n = var.shape[0]
    inv_xi = 1.0 / xi
    t = np.full(n, float(init))
    tt = np.full(n, float(init))
    var_t = np.ascontiguousarray(var.T)
    resid = np.inf
    for it in range(1, max_iter + 1):
        a = var @ tt / n
        b = var_t @ t / n
        tn = 1.0 / (inv_xi * (1.0 + a) + 1.0 / (1.0 + b))
        ttn = 1.0 / (inv_xi * (1.0 + b) + 1.0 / (1.0 + a))
        resid = max(np.max(np.abs(tn - t) / np.maximum(1.0, tn)),
                    np.max(np.abs(ttn - tt) / np.maximum(1.0, ttn)))
        t = (1.0 - alpha) * t + alpha * tn
        tt = (1.0 - alpha) * tt + alpha * ttn
        if resid < tol:
            return t, tt, it, resid
    return t, tt, max_iter, resid


def fixed_point(var, xi, alpha=0.5, tol=1e-12, max_iter=100_000, init=1.0):
    """Damped Jacobi iteration; returns ``(t, t_tilde, iterations, residual)``."""
    var = np.ascontiguousarray(var, dtype=float)
    if NUMBA_ENABLED:
        return fixed_point_jit(var, float(xi), float(alpha), float(tol), int(max_iter), float(init))
    return fixed_point_numpy(var, float(xi), float(alpha), float(tol), int(max_iter), float(init))
