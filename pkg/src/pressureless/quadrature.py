"""Vectorised adaptive Gauss-Kronrod (G7/K15) quadrature.

The integrand receives a 1-D array of nodes and returns either an array of the
same length or a ``(k, n)`` array, so several integrals that share the same
nodes (numerator and denominator of a conditional mean, for example) are
refined together.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError

# Kronrod nodes on [0, 1]; odd positions are the 7-point Gauss nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _rule(func, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    y = np.asarray(func(x), dtype=float)
    squeeze = y.ndim == 1
    y = np.atleast_2d(y).reshape(-1, a.size, 15)
    k = half[None, :] * (y @ _KW)
    g = half[None, :] * (y @ _GW)
    return k, np.abs(k - g), squeeze


def integrate(func, breaks, tol=1e-10, max_intervals=20000):
    """Integrate ``func`` over the union of consecutive intervals in ``breaks``.

    ``breaks`` is an increasing sequence; integration runs from ``breaks[0]``
    to ``breaks[-1]`` with an initial split at every entry.  ``tol`` is an
    absolute tolerance on the summed error estimate (max over components).
    Returns ``(value, error_estimate)``.
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.size < 2:
        raise ValueError("need at least two break points")
    keep = np.concatenate([[True], np.diff(breaks) > 0])
    breaks = breaks[keep]
    if breaks.size < 2:
        return 0.0, 0.0

    a = breaks[:-1].copy()
    b = breaks[1:].copy()
    done_val = None
    done_err = None
    total_err = np.inf
    squeeze = True
    floored = False
    for _ in range(200):
        val, err, squeeze = _rule(func, a, b)
        if done_val is None:
            done_val = np.zeros(val.shape[0])
            done_err = np.zeros(val.shape[0])
        e = err.max(axis=0)
        remaining = tol - done_err.max()
        total_err = done_err.max() + e.sum()
        if total_err <= tol or a.size == 0:
            done_val += val.sum(axis=1)
            done_err += err.sum(axis=1)
            break
        width = b - a
        share = max(remaining, 0.0) * width / width.sum()
        tiny = width <= 1e-15 * np.maximum(1.0, np.abs(a))
        ok = (e <= share) | tiny
        floored = floored or bool(np.any(tiny & (e > share)))
        done_val += val[:, ok].sum(axis=1)
        done_err += err[:, ok].sum(axis=1)
        a, b = a[~ok], b[~ok]
        if a.size == 0:
            break
        if 2 * a.size > max_intervals:
            raise ConvergenceError(
                f"quadrature did not converge (error estimate {total_err:.3e} > {tol:.1e})",
                residual=total_err,
            )
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
    else:
        raise ConvergenceError("quadrature exceeded refinement levels", residual=total_err)

    if floored and done_err.max() > tol:
        raise ConvergenceError(
            f"quadrature hit the resolution floor (error estimate {done_err.max():.3e} > {tol:.1e})",
            residual=float(done_err.max()),
        )
    if squeeze and done_val.size == 1:
        return float(done_val[0]), float(done_err[0])
    return done_val, done_err


def bisect_vec(func, lo, hi, tol=1e-12, max_iter=200):
    """Elementwise bisection for roots bracketed by ``[lo, hi]``.

    ``func`` maps an array of abscissae to an array of values; every bracket
    must have a sign change.  Returns the midpoint of the final brackets.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    flo = func(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
        fm = func(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)
