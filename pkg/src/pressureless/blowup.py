"""Gradient catastrophe: critical time, characteristic roots and peak asymptotics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .errors import DomainError, GeometryError
from .fields import PiecewiseFunction
from .kernel import KernelParams, PhaseDensity, default_L
from .quadrature import bisect_vec, integrate

SCAN_POINTS = 10_000
MAX_ORDER = 6


def _segments(f: PiecewiseFunction, lo, hi):
    cuts = [b for b in f.breakpoints if lo < b < hi]
    edges = [lo] + cuts + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        yield a, b, f.pieces[int(f.piece_index(0.5 * (a + b)))]


@dataclass(frozen=True)
class BlowupReport:
    t_star: float
    s_star: float
    x_star: float
    m: object = None
    B: float = math.nan
    A: float = math.nan
    segment: tuple | None = None


def critical_time(u0: PiecewiseFunction, span=20.0):
    """``(t_star, s_star, x_star)`` with ``t_star = inf(-1/u0')``; infinite if ``u0`` never decreases."""
    best = (0.0, None, None)   # most negative slope
    for a, b, piece in _segments(u0, -span, span):
        s = np.linspace(a, b, SCAN_POINTS)
        d = piece.derivative(s, 1)
        i = int(np.argmin(d))
        if d[i] < best[0]:
            best = (float(d[i]), float(s[i]), piece)
            lo, hi = s[max(i - 1, 0)], s[min(i + 1, s.size - 1)]
            if hi > lo:
                res = minimize_scalar(lambda v, p=piece: float(p.derivative(np.array([v]), 1)[0]),
                                      bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
                if res.fun < d[i] or abs(res.fun - d[i]) < 1e-15:
                    best = (float(res.fun), float(res.x), piece)
    slope, s_star, piece = best
    if s_star is None:
        return math.inf, math.nan, math.nan
    t_star = -1.0 / slope
    x_star = float(piece(np.array([s_star]))[0]) * t_star + s_star
    return t_star, s_star, x_star


def derivative_order(u0: PiecewiseFunction, s, tol=1e-6):
    """First ``k >= 2`` with ``u0^(k)(s) != 0``; ``None`` if all orders up to six vanish."""
    scale = max(1.0, abs(float(u0.derivative(s, 1))))
    for k in range(2, MAX_ORDER + 1):
        if abs(float(u0.derivative(s, k))) > tol * scale:
            return k
    return None


def km_constant(m: int) -> float:
    """``K_m = (m!)^(1/m) Gamma(1/(2m)) / (2^((m-1)/(2m)) m sqrt(pi))``."""
    if int(m) != m or m < 2:
        raise DomainError("K_m is defined for integers m >= 2")
    m = int(m)
    log = (gammaln(m + 1) / m + gammaln(1.0 / (2 * m)) - (m - 1) / (2 * m) * math.log(2)
           - math.log(m) - 0.5 * math.log(math.pi))
    return math.exp(log)


def km_constant_by_quadrature(m: int, tol=1e-13) -> float:
    """``K_m`` with the Gamma value replaced by quadrature of ``int exp(-s^(2m)) ds``."""
    tail = 3.0 ** (1.0 / (2 * m)) * 2
    val, _ = integrate(lambda s: np.exp(-s ** (2 * m)), np.linspace(-tail, tail, 33), tol=tol)
    gamma_val = val * m   # int exp(-s^(2m)) ds = Gamma(1/(2m)) / m
    return math.exp(math.lgamma(m + 1) / m) * gamma_val / (2 ** ((m - 1) / (2 * m)) * m * math.sqrt(math.pi))


def peak_constant(u0: PiecewiseFunction, s_star, m):
    """``B`` in ``rho_sigma(t*, x*) ~ B f0(s*) sigma^(-(m-1)/m)``."""
    d1 = abs(float(u0.derivative(s_star, 1)))
    dm = abs(float(u0.derivative(s_star, m)))
    return km_constant(m) * d1 ** ((m + 1) / (2 * m)) / dm ** (1.0 / m)


class Root(NamedTuple):
    s: float
    multiplicity: int


def characteristic_roots_detail(u0: PiecewiseFunction, t, x, L=20.0, tol=1e-12):
    """Roots of ``u0(s) t + s - x`` on ``[-L, L]`` with multiplicities."""
    if t < 0:
        raise DomainError("time must be non-negative")
    if t == 0:
        return [Root(float(x), 1)]
    out = []
    for a, b, piece in _segments(u0, -L, L):
        s = np.linspace(a, b, SCAN_POINTS)
        g = piece(s) * t + s - x
        gf = lambda v, p=piece: p(v) * t + v - x
        exact = np.nonzero(g == 0)[0]
        idx = np.nonzero(g[:-1] * g[1:] < 0)[0]
        found = [float(v) for v in s[exact]]
        if idx.size:
            found += bisect_vec(gf, s[idx], s[idx + 1], tol=tol).tolist()
        # touching roots: local minima of |g| that reach zero without a sign change
        ag = np.abs(g)
        if s.size > 2:
            loc = np.nonzero((ag[1:-1] < ag[:-2]) & (ag[1:-1] < ag[2:]) & (g[:-2] * g[2:] > 0))[0] + 1
            for i in loc:
                res = minimize_scalar(lambda v, p=piece: abs(float(p(np.array([v]))[0]) * t + v - x),
                                      bounds=(s[i - 1], s[i + 1]), method="bounded",
                                      options={"xatol": 1e-13})
                if res.fun < 1e-10 * max(1.0, abs(x)):
                    found.append(float(res.x))
        for r in sorted(found):
            if out and abs(r - out[-1].s) < 1e-9:
                continue
            if not a <= r <= b:
                continue
            out.append(Root(r, _multiplicity(piece, r, t)))
    return sorted(out)


def _multiplicity(piece, r, t, tol=1e-6):
    rv = np.array([r])
    if abs(float(piece.derivative(rv, 1)[0]) * t + 1) > tol:
        return 1
    for k in range(2, MAX_ORDER + 1):
        if abs(float(piece.derivative(rv, k)[0]) * t) > tol:
            return k
    return MAX_ORDER + 1


def characteristic_roots(u0: PiecewiseFunction, t, x, L=20.0):
    """Sorted labels ``s`` with ``u0(s) t + s = x``; tangential roots appear once."""
    return [r.s for r in characteristic_roots_detail(u0, t, x, L)]


def find_segment(u0: PiecewiseFunction, t, x, span=20.0, tol=1e-8):
    """Maximal interval on which ``u0(s) = (x - s)/t``, or ``None``."""
    best = None
    for a, b, piece in _segments(u0, -span, span):
        s = np.linspace(a, b, SCAN_POINTS)
        g = piece(s) * t + s - x
        slope = piece.derivative(s, 1) + 1.0 / t
        on = (np.abs(g) < tol) & (np.abs(slope) < tol)
        if np.count_nonzero(on) < 2:
            continue
        d = np.diff(np.concatenate([[0], on.astype(int), [0]]))
        starts, stops = np.nonzero(d == 1)[0], np.nonzero(d == -1)[0] - 1
        for i0, i1 in zip(starts, stops):
            if i1 <= i0:
                continue
            lo, hi = float(s[i0]), float(s[i1])
            pred = lambda v, p=piece: np.where(np.abs(p(v) * t + v - x) < tol, -1.0, 1.0)
            if i0 > 0:
                lo = float(bisect_vec(pred, np.array([s[i0]]), np.array([s[i0 - 1]]))[0])
            if i1 < s.size - 1:
                hi = float(bisect_vec(pred, np.array([s[i1]]), np.array([s[i1 + 1]]))[0])
            if best is None:
                best = [lo, hi]
            elif abs(lo - best[1]) < 1e-9:
                best[1] = hi
            elif hi - lo > best[1] - best[0]:
                best = [lo, hi]
    return None if best is None else tuple(best)


def delta_amplitude(u0: PiecewiseFunction, f0: PiecewiseFunction, t, x_tangent, span=20.0):
    """Mass ``int_{s1}^{s2} f0`` carried by the segment of ``u0`` on the line ``(x - s)/t``."""
    seg = find_segment(u0, t, x_tangent, span)
    if seg is None:
        raise GeometryError("point tangency: amplitude is zero initially")
    s1, s2 = seg
    brk = [s1] + [b for b in f0.breakpoints if s1 < b < s2] + [s2]
    val, _ = integrate(f0, brk, tol=1e-12)
    return float(val)


def analyse(u0: PiecewiseFunction, f0: PiecewiseFunction, span=20.0) -> BlowupReport:
    t_star, s_star, x_star = critical_time(u0, span)
    if not math.isfinite(t_star):
        return BlowupReport(t_star, s_star, x_star)
    seg = find_segment(u0, t_star, x_star, span)
    if seg is not None:
        A = delta_amplitude(u0, f0, t_star, x_star, span)
        return BlowupReport(t_star, 0.5 * (seg[0] + seg[1]), x_star, "linear-segment", math.nan, A, seg)
    m = derivative_order(u0, s_star)
    B = peak_constant(u0, s_star, m) if m is not None else math.nan
    return BlowupReport(t_star, s_star, x_star, m, B, 0.0)


@dataclass(frozen=True)
class ScalingFit:
    sigmas: np.ndarray
    rho: np.ndarray
    slope: float
    expected_slope: float
    prefactor: float
    expected_prefactor: float
    intercept: float


def scaling_exponent(u0: PiecewiseFunction, f0: PiecewiseFunction, sigmas=None, quad_tol=1e-10,
                     report: BlowupReport | None = None) -> ScalingFit:
    """Log-log slope of ``rho_sigma(t*, x*)`` against ``sigma``.

    ``prefactor`` is ``rho sigma^((m-1)/m)`` at the smallest sigma and
    ``intercept`` the regression prefactor.
    """
    report = analyse(u0, f0) if report is None else report
    if report.m == "linear-segment":
        raise GeometryError("use amplitude, a linear segment carries a delta at blow-up")
    if report.m is None or not math.isfinite(report.t_star):
        raise GeometryError("no non-degenerate blow-up point")
    m = report.m
    sigmas = np.logspace(-1, -3, 5) if sigmas is None else np.asarray(sigmas, dtype=float)
    t, x = report.t_star, report.x_star
    L = max(10.0, default_L(u0, t, float(sigmas.max())))
    rho = np.array([PhaseDensity(f0, u0, KernelParams(float(sg), L, quad_tol)).moments(t, x).rho
                    for sg in sigmas])
    slope, icpt = np.polyfit(np.log(sigmas), np.log(rho), 1)
    expo = (m - 1) / m
    k = int(np.argmin(sigmas))
    f_star = float(f0(report.s_star))
    return ScalingFit(sigmas, rho, float(slope), -expo, float(rho[k] * sigmas[k] ** expo),
                      report.B * f_star, float(math.exp(icpt)))


def pair_density(pd: PhaseDensity, t, phi, lo, hi, breaks=(), tol=1e-8):
    """``int_lo^hi rho_sigma(t, x) phi(x) dx`` by quadrature in ``x``."""
    brk = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})

    def f(xs):
        return np.array([pd.moments(t, v).rho for v in xs]) * phi(xs)

    val, _ = integrate(f, brk, tol=tol)
    return float(val)


def bump(delta, center=0.0):
    """C^2 test function ``(1 - ((x - c)/delta)^2)^2`` on ``|x - c| < delta``."""
    def phi(x):
        z = (np.asarray(x, dtype=float) - center) / delta
        return np.where(np.abs(z) < 1, (1 - z * z) ** 2, 0.0)
    return phi


def window_mass(pd: PhaseDensity, t, x, delta, tol=1e-9):
    """Mass of ``rho_sigma(t, .)`` in ``|y - x| < delta``."""
    sc = pd.params.sigma * math.sqrt(t)
    brk = np.unique(np.clip(x + np.array([-delta, -10 * sc, -3 * sc, 0, 3 * sc, 10 * sc, delta]),
                            x - delta, x + delta))
    return pair_density(pd, t, lambda v: np.ones_like(v), x - delta, x + delta, brk, tol)
