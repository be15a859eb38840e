"""Gaussian-kernel evaluation of the stochastically perturbed free-particle fields.

For initial density ``f0`` and velocity ``u0`` the perturbed density and the
conditional velocity are one-dimensional integrals over the particle label
``s``::

    rho(t, x)   = (2 pi t)^(-1/2) / sigma * int f0(s) exp(-g(s)^2 / (2 sigma^2 t)) ds
    u_hat(t, x) = int u0 f0 exp(...) ds / int f0 exp(...) ds

with ``g(s) = u0(s) t + s - x``.  The Gaussian is numerically zero outside a
thin band ``|g| <= T`` so every evaluation first locates that band on a
precomputed label mesh and integrates only there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError, VacuumError
from .fields import PiecewiseFunction, RiemannData, SmoothData
from .quadrature import bisect_vec, integrate

BAND_SDS = 12.0
MESH_STEP = 4e-3
MESH_MIN = 24
MESH_MAX = 6000


@dataclass(frozen=True)
class KernelParams:
    sigma: float
    L: float = 20.0
    quad_tol: float = 1e-10

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not self.L >= 10:
            raise ConfigError("truncation half-width L must be at least 10")
        if not 0 < self.quad_tol <= 1e-4:
            raise ConfigError("quad_tol must lie in (0, 1e-4]")

    def with_sigma(self, sigma):
        return KernelParams(sigma, self.L, self.quad_tol)


def default_L(u0: PiecewiseFunction, t_max, sigma_max, span=20.0):
    sup = u0.sup_norm(-span, span)
    return 10.0 + sup * t_max + 10.0 * sigma_max * math.sqrt(t_max)


class Moments(NamedTuple):
    rho: float
    u_hat: float
    pressure: float
    log_scale: float


class TermSplit(NamedTuple):
    total: float
    i1: float
    i2: float
    i3: float


@dataclass
class _Segment:
    a: float
    b: float
    fp: object
    up: object
    s: np.ndarray
    f: np.ndarray
    u: np.ndarray


def initial_pair(data, epsilon=None, shape="linear"):
    """Resolve ``data`` to ``(f0, u0)`` piecewise functions.

    Riemann data is mollified with ``epsilon``; smooth data and explicit pairs
    pass through.
    """
    if isinstance(data, RiemannData):
        if epsilon is None:
            raise ConfigError("Riemann data needs a mollification epsilon")
        return data.mollified(epsilon, shape)
    if isinstance(data, SmoothData):
        return data.f0, data.u0
    if isinstance(data, tuple) and len(data) == 2:
        return data
    if hasattr(data, "f0") and hasattr(data, "u0"):
        return data.f0, data.u0
    raise ConfigError(f"cannot interpret initial data of type {type(data).__name__}")


class PhaseDensity:
    """Kernel solution for fixed initial data and parameters.

    The label mesh is built once per instance; all evaluations reuse it.
    """

    def __init__(self, f0: PiecewiseFunction, u0: PiecewiseFunction, params: KernelParams):
        self.f0 = f0
        self.u0 = u0
        self.params = params
        self._segments = self._build_mesh()

    @classmethod
    def from_data(cls, data, params, epsilon=None, shape="linear"):
        f0, u0 = initial_pair(data, epsilon, shape)
        return cls(f0, u0, params)

    def _build_mesh(self):
        L = self.params.L
        cuts = sorted({b for b in self.f0.breakpoints + self.u0.breakpoints if -L < b < L})
        edges = [-L] + cuts + [L]
        segs = []
        for a, b in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (a + b)
            fp = self.f0.pieces[int(self.f0.piece_index(mid))]
            up = self.u0.pieces[int(self.u0.piece_index(mid))]
            n = int(np.clip((b - a) / MESH_STEP, MESH_MIN, MESH_MAX))
            s = np.linspace(a, b, n)
            f = fp(s)
            if np.any(f < -1e-14):
                raise DomainError("initial density must be non-negative")
            segs.append(_Segment(a, b, fp, up, s, f, up(s)))
        return segs

    # -- localisation ------------------------------------------------------
    def _gmin(self, t, x):
        """Smallest ``|g|`` over the support of ``f0``, and whether ``g`` vanishes there."""
        best = math.inf
        best_seg = None
        best_i = -1
        for seg in self._segments:
            g = seg.u * t + seg.s - x
            live = seg.f > 0
            if not np.any(live):
                continue
            cell_live = live[:-1] | live[1:]
            if np.any((g[:-1] * g[1:] <= 0) & cell_live):
                return 0.0
            ag = np.where(live, np.abs(g), np.inf)
            i = int(np.argmin(ag))
            if ag[i] < best:
                best, best_seg, best_i = float(ag[i]), seg, i
        if best_seg is None:
            raise VacuumError(f"vacuum at (t={t!r}, x={x!r}): density vanishes on [-L, L]")
        seg, i = best_seg, best_i
        lo = seg.s[max(i - 1, 0)]
        hi = seg.s[min(i + 1, seg.s.size - 1)]
        if hi > lo:
            res = minimize_scalar(lambda v: abs(float(seg.up(np.array([v]))[0]) * t + v - x),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
            best = min(best, float(res.fun))
        return best

    def _runs(self, t, x, T):
        """Yield ``(segment, breaks)`` covering the band ``|g| <= T``."""
        for seg in self._segments:
            s = seg.s
            g = seg.u * t + s - x
            live = seg.f > 0
            cell_live = live[:-1] | live[1:]
            ag = np.abs(g)
            flag = np.minimum(ag[:-1], ag[1:]) <= T
            flag |= g[:-1] * g[1:] < 0
            extra = []
            if s.size > 2:
                mid = ag[1:-1]
                left, right = ag[:-2], ag[2:]
                cand = (mid <= left) & (mid <= right) & ((mid < left) | (mid < right)) & (mid > T)
                var = np.maximum(np.abs(g[2:] - g[1:-1]), np.abs(g[1:-1] - g[:-2]))
                cand &= mid - var <= T
                idx = np.nonzero(cand)[0] + 1
                gf = lambda v: abs(float(seg.up(np.array([v]))[0]) * t + v - x)
                for i in idx[:400]:
                    res = minimize_scalar(gf, bounds=(s[i - 1], s[i + 1]), method="bounded",
                                          options={"xatol": 1e-13})
                    if res.fun <= T:
                        flag[i - 1] = flag[i] = True
                        extra.append(float(res.x))
            flag &= cell_live
            if not np.any(flag):
                continue
            # maximal runs of consecutive flagged cells
            d = np.diff(np.concatenate([[0], flag.astype(int), [0]]))
            starts = np.nonzero(d == 1)[0]
            stops = np.nonzero(d == -1)[0]
            gfun = lambda v: seg.up(v) * t + v - x
            for c0, c1 in zip(starts, stops):
                cells = np.arange(c0, c1)
                lo_n, hi_n = s[cells], s[cells + 1]
                glo, ghi = g[cells], g[cells + 1]
                brk = [s[c0], s[c1]]
                for level in (0.0, T, -T):
                    sel = (glo - level) * (ghi - level) < 0
                    if np.any(sel):
                        r = bisect_vec(lambda v, lv=level: gfun(v) - lv, lo_n[sel], hi_n[sel], tol=1e-15)
                        brk.extend(r.tolist())
                brk.extend(e for e in extra if s[c0] < e < s[c1])
                yield seg, np.unique(np.asarray(brk))

    # -- evaluation --------------------------------------------------------
    def _check_t(self, t):
        if not t > 0:
            raise DomainError("time must be positive")

    def _integrate(self, t, x, weight, tol):
        sigma = self.params.sigma
        s2t = sigma * sigma * t
        gmin = self._gmin(t, x)
        T = math.sqrt(gmin * gmin + (BAND_SDS * sigma * math.sqrt(t)) ** 2)
        norm = math.sqrt(2 * math.pi * t) * sigma
        gmin2 = gmin * gmin
        runs = list(self._runs(t, x, T))
        total = None
        share = tol / max(1, len(runs))
        for seg, brk in runs:
            def func(v, seg=seg):
                u = seg.up(v)
                f = seg.fp(v)
                g = u * t + v - x
                w = f * np.exp(-(g * g - gmin2) / (2 * s2t)) / norm
                return weight(w, u, g)

            val, _ = integrate(func, brk, tol=share)
            val = np.atleast_1d(val)
            total = val if total is None else total + val
        return total, gmin2 / (2 * s2t)

    def moments(self, t, x) -> Moments:
        """Density, conditional velocity and velocity-dispersion pressure at ``(t, x)``."""
        self._check_t(t)
        x = float(x)
        vals, logscale = self._integrate(t, x, lambda w, u, g: np.stack([w, w * u, w * u * u]),
                                         self.params.quad_tol)
        if vals is None or not vals[0] > 1e-300:
            raise VacuumError(f"vacuum at (t={t!r}, x={x!r})")
        z, zu, zuu = vals
        u_hat = zu / z
        var = max(zuu / z - u_hat * u_hat, 0.0)
        scale = math.exp(-logscale)
        return Moments(z * scale, u_hat, z * var * scale, logscale)

    def rho(self, t, x):
        return _vectorise(lambda xv: self.moments(t, xv).rho, x)

    def u_hat(self, t, x):
        return _vectorise(lambda xv: self.moments(t, xv).u_hat, x)

    def integral_term(self, t, x, u_ref=None) -> TermSplit:
        """Velocity-dispersion term ``int (u - u_hat)^2 P_x du`` at ``(t, x)``.

        The x-derivative acts on the Gaussian exponent only.  ``u_ref`` (the
        limiting velocity) splits the total into the dispersion about
        ``u_ref`` (``i1``), the cross term (``i2``) and the mean-shift term
        (``i3``); the three always add up to ``total``.
        """
        self._check_t(t)
        x = float(x)
        m = self.moments(t, x)
        uh = m.u_hat
        ur = uh if u_ref is None else float(u_ref)
        s2t = self.params.sigma ** 2 * t
        tol = self.params.quad_tol * max(1.0, 1.0 / (self.params.sigma * math.sqrt(t)))

        def weight(w, u, g):
            wg = w * g / s2t
            return np.stack([wg * (u - ur) ** 2, wg * (u - ur), wg])

        vals, logscale = self._integrate(t, x, weight, tol)
        scale = math.exp(-logscale)
        a, b, c = (v * scale for v in vals)
        i1 = a
        i2 = 2 * (ur - uh) * b
        i3 = (ur - uh) ** 2 * c
        return TermSplit(i1 + i2 + i3, i1, i2, i3)

    def phase_density(self, t, x, u):
        """``P(t, x, u)`` where ``u0`` is strictly monotone near the preimages of ``u``.

        Sums ``f0(s)/|u0'(s)|`` times the Gaussian over every label with
        ``u0(s) = u``.
        """
        self._check_t(t)
        sigma = self.params.sigma
        norm = math.sqrt(2 * math.pi * t) * sigma
        total = 0.0
        for seg in self._segments:
            d = seg.u - u
            idx = np.nonzero(d[:-1] * d[1:] < 0)[0]
            hits = list(seg.s[np.nonzero(d == 0)[0]])
            if idx.size:
                r = bisect_vec(lambda v: seg.up(v) - u, seg.s[idx], seg.s[idx + 1], tol=1e-15)
                hits.extend(r.tolist())
            for sk in hits:
                sv = np.array([sk])
                slope = abs(float(seg.up.derivative(sv, 1)[0]))
                if slope == 0:
                    raise DomainError("phase density is singular where u0 is flat")
                fk = float(seg.fp(sv)[0])
                total += fk / slope * math.exp(-(u * t + sk - x) ** 2 / (2 * sigma * sigma * t)) / norm
        return total


def _vectorise(fn, x):
    xa = np.asarray(x, dtype=float)
    if xa.ndim == 0:
        return fn(float(xa))
    return np.array([fn(float(v)) for v in xa])


def _phase(data, params, epsilon=None, shape="linear"):
    if isinstance(data, PhaseDensity):
        return data
    return PhaseDensity.from_data(data, params, epsilon, shape)


def rho_sigma(data, params: KernelParams, t, x, epsilon=None):
    """Perturbed density at time ``t`` (scalar or array ``x``)."""
    return _phase(data, params, epsilon).rho(t, x)


def u_hat_sigma(data, params: KernelParams, t, x, epsilon=None):
    """Conditional velocity at time ``t`` (scalar or array ``x``)."""
    return _phase(data, params, epsilon).u_hat(t, x)


def integral_term(data, params: KernelParams, t, x, epsilon=None, u_ref=None):
    return _phase(data, params, epsilon).integral_term(t, x, u_ref).total


def with_L_doubling(fn, params: KernelParams, max_doublings=6):
    """Evaluate ``fn(params)`` with ``L`` doubled until the value moves by less than quad_tol."""
    prev = np.asarray(fn(params), dtype=float)
    p = params
    for _ in range(max_doublings):
        p = KernelParams(p.sigma, 2 * p.L, p.quad_tol)
        cur = np.asarray(fn(p), dtype=float)
        if np.max(np.abs(cur - prev)) < params.quad_tol:
            return cur, p.L
        prev = cur
    return prev, p.L


# ---------------------------------------------------------------------------
# viscous system residuals

def viscous_residual(data, params: KernelParams, t, x, h=1e-3, epsilon=None, include_term=True):
    """Central-difference residuals of the viscous mass and momentum balances.

    Returns ``(r_mass, r_momentum)`` where::

        r_mass     = rho_t + (rho u)_x - sigma^2/2 rho_xx
        r_momentum = (rho u)_t + (rho u^2)_x - sigma^2/2 (rho u)_xx + dispersion term
    """
    if not t > h:
        raise DomainError("time must exceed the difference step")
    pd = _phase(data, params, epsilon)
    if abs(x) + h >= params.L:
        raise DomainError("difference stencil leaves [-L, L]")

    def fields(tv, xv):
        m = pd.moments(tv, xv)
        return np.array([m.rho, m.rho * m.u_hat, m.rho * m.u_hat ** 2])

    c = fields(t, x)
    xp, xm = fields(t, x + h), fields(t, x - h)
    tp, tm = fields(t + h, x), fields(t - h, x)
    d_t = (tp - tm) / (2 * h)
    d_x = (xp - xm) / (2 * h)
    d_xx = (xp - 2 * c + xm) / h ** 2
    half_s2 = 0.5 * params.sigma ** 2
    r_mass = d_t[0] + d_x[1] - half_s2 * d_xx[0]
    r_mom = d_t[1] + d_x[2] - half_s2 * d_xx[1]
    if include_term:
        r_mom += pd.integral_term(t, x).total
    return float(r_mass), float(r_mom)


# ---------------------------------------------------------------------------
# double limit

def default_schedule(eps0=0.1, stages=6):
    """``(eps_k, sigma_k) = (eps0 2^-k, eps_k^2)`` for ``k = 0..stages``."""
    out = []
    for k in range(stages + 1):
        e = eps0 * 2.0 ** (-k)
        out.append((e, e * e))
    return out


def check_schedule(schedule):
    if not schedule:
        raise ConfigError("empty schedule")
    for e, s in schedule:
        if not (e > 0 and s > 0):
            raise ConfigError("schedule entries must be positive")
        if not s < e:
            raise ConfigError("each stage needs sigma < epsilon")
    for (e1, s1), (e2, s2) in zip(schedule, schedule[1:]):
        if not (e2 < e1 and s2 < s1):
            raise ConfigError("schedule must be strictly decreasing in epsilon and sigma")


@dataclass
class FPSolution:
    """Grid values of a free-particle limit at time ``t``."""

    t: float
    xs: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    pressure: np.ndarray
    atoms: tuple = ()


@dataclass
class ConvergenceReport:
    stages: list
    cauchy_rho: np.ndarray
    cauchy_u: np.ndarray
    near_singular: np.ndarray
    history: list = field(default_factory=list)


def fp_solution(data, grid, schedule=None, params: KernelParams | None = None, shape="linear",
                L=None, quad_tol=1e-10):
    """Evaluate the kernel fields along a decreasing ``(eps, sigma)`` schedule.

    The last stage is reported as the limit; the difference to the previous
    stage is the per-point convergence estimate.
    """
    schedule = default_schedule() if schedule is None else list(schedule)
    check_schedule(schedule)
    t = grid.t
    if not t > 0:
        raise DomainError("grid time must be positive")
    history = []
    for eps, sigma in schedule:
        f0, u0 = initial_pair(data, eps, shape)
        if params is not None:
            p = params.with_sigma(sigma)
        else:
            p = KernelParams(sigma, L if L is not None else max(10.0, default_L(u0, t, sigma)), quad_tol)
        pd = PhaseDensity(f0, u0, p)
        ms = [pd.moments(t, xv) for xv in grid.xs]
        history.append((np.array([m.rho for m in ms]), np.array([m.u_hat for m in ms]),
                        np.array([m.pressure for m in ms])))
    rho, u, pres = history[-1]
    if len(history) > 1:
        cr = np.abs(rho - history[-2][0])
        cu = np.abs(u - history[-2][1])
    else:
        cr = np.full(rho.shape, np.nan)
        cu = np.full(rho.shape, np.nan)
    tol = params.quad_tol if params is not None else quad_tol
    flag = (cr > 10 * tol) | (cu > 10 * tol)
    atoms = ()
    if isinstance(data, RiemannData) and data.f3 != 0 and data.is_constant:
        atoms = ((data.u1 * t + data.x0, data.f3 / 2), ((data.u1 + data.u2) * t + data.x0, data.f3 / 2))
    sol = FPSolution(t, grid.xs, rho, u, pres, atoms)
    return sol, ConvergenceReport(schedule, cr, cu, flag, history)


def prop4_independence(data, grid, shapes=("linear", "smoothstep"), schedule=None, exclude=(),
                       width=None, **kw):
    """Largest density and velocity discrepancy between two mollification shapes.

    Grid points within ``width`` (default twice the final epsilon) of any
    location in ``exclude`` are ignored.  Returns ``(d_rho, d_u)``.
    """
    schedule = default_schedule() if schedule is None else list(schedule)
    s1, _ = fp_solution(data, grid, schedule, shape=shapes[0], **kw)
    if shapes[0] == shapes[1]:
        s2 = s1
    else:
        s2, _ = fp_solution(data, grid, schedule, shape=shapes[1], **kw)
    w = 2 * schedule[-1][0] if width is None else width
    keep = np.ones(grid.xs.size, dtype=bool)
    for loc in exclude:
        keep &= np.abs(grid.xs - loc) > w
    if not np.any(keep):
        return 0.0, 0.0
    return (float(np.max(np.abs(s1.rho - s2.rho)[keep])),
            float(np.max(np.abs(s1.u - s2.u)[keep])))
