"""Scalar laws ``v_t + G(v) v_x = 0`` reduced to Burgers form through ``u = G(v)``.

Everything downstream works in ``u``; results are mapped back with ``G^-1``.
Densities and atoms are not touched by the map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError
from .fields import Piece, PiecewiseFunction, RiemannData, SmoothData
from .quadrature import bisect_vec


class FluxMap:
    """Non-degenerate map ``G`` on an open interval ``domain``.

    ``G`` is a :class:`Piece` so derivatives of any order are available;
    ``G_inverse`` is bracketed bisection unless supplied.
    """

    def __init__(self, G, G_inverse=None, G_prime=None, domain=(-math.inf, math.inf), name=""):
        if isinstance(G, str):
            G = Piece.from_expr(G, "v")
        elif not isinstance(G, Piece):
            G = Piece(G, (G_prime,) if G_prime is not None else ())
        self.piece = G
        self._inverse = G_inverse
        lo, hi = (float(d) for d in domain)
        if not lo < hi:
            raise ConfigError("flux domain must be a non-empty interval")
        self.domain = (lo, hi)
        self.name = name or G.label

    def G(self, v):
        return self.piece(np.asarray(v, dtype=float))

    def G_prime(self, v):
        return self.piece.derivative(np.asarray(v, dtype=float), 1)

    def derivative(self, v, order):
        return self.piece.derivative(np.asarray(v, dtype=float), order)

    def in_domain(self, v):
        v = np.asarray(v, dtype=float)
        return (v > self.domain[0]) & (v < self.domain[1])

    def _increasing(self):
        lo, hi = self.domain
        probe = 0.0 if lo < 0 < hi else (lo + 1.0 if math.isinf(hi) else
                                         (hi - 1.0 if math.isinf(lo) else 0.5 * (lo + hi)))
        return float(self.G_prime(probe)) > 0

    def G_inverse(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if self._inverse is not None:
            v = np.asarray(self._inverse(u), dtype=float)
        else:
            v = self._bisect(u)
        bad = ~np.isfinite(v) | ~self.in_domain(v)
        if np.any(bad):
            raise DomainError(f"value {float(u[bad][0])!r} is outside the range of the flux {self.name}")
        return float(v[0]) if scalar else v

    def _bisect(self, u):
        sign = 1.0 if self._increasing() else -1.0
        lo_d, hi_d = self.domain
        lo = np.full(u.shape, -1.0 if math.isinf(lo_d) else lo_d)
        hi = np.full(u.shape, 1.0 if math.isinf(hi_d) else hi_d)
        h = lambda v, target=u: sign * (self.G(v) - target)
        with np.errstate(all="ignore"):
            for _ in range(64):
                need_hi = (h(hi) < 0) & math.isinf(hi_d)
                need_lo = (h(lo) > 0) & math.isinf(lo_d)
                if not (np.any(need_hi) or np.any(need_lo)):
                    break
                hi = np.where(need_hi, 2 * np.abs(hi) + 1, hi)
                lo = np.where(need_lo, -2 * np.abs(lo) - 1, lo)
            ok = (h(lo) <= 0) & (h(hi) >= 0)
        out = np.full(u.shape, np.nan)
        if np.any(ok):
            out[ok] = bisect_vec(lambda v: h(v, u[ok]), lo[ok], hi[ok], tol=1e-15)
        return out

    def check(self, samples=None, tol=1e-10):
        """Non-degeneracy and round trip on ``samples`` (100 points of the domain by default)."""
        if samples is None:
            lo, hi = (max(self.domain[0], -5.0), min(self.domain[1], 5.0))
            samples = np.linspace(lo, hi, 102)[1:-1]
        samples = np.asarray(samples, dtype=float)
        if np.any(np.abs(self.G_prime(samples)) < 1e-12):
            raise DomainError("degenerate flux: G' vanishes")
        back = self.G_inverse(self.G(samples))
        err = float(np.max(np.abs(back - samples) / np.maximum(1.0, np.abs(samples))))
        if err > tol:
            raise DomainError(f"flux inverse round trip error {err:.3g}")
        return err

    def __repr__(self):
        return f"FluxMap({self.name!r}, domain={self.domain})"


def preset_flux(name) -> FluxMap:
    if name == "identity":
        return FluxMap("v", lambda u: np.asarray(u, dtype=float), name="identity")
    if name == "square-positive":
        return FluxMap("v**2", lambda u: np.where(np.asarray(u) > 0, np.sqrt(np.abs(u)), np.nan),
                       domain=(0.0, math.inf), name="square-positive")
    if name == "exp":
        return FluxMap("exp(v)", lambda u: np.where(np.asarray(u) > 0, np.log(np.abs(u)), np.nan),
                       name="exp")
    raise ConfigError(f"unknown flux preset {name!r}")


FLUX_PRESETS = ("identity", "square-positive", "exp")


def _compose_piece(flux: FluxMap, p: Piece) -> Piece:
    def f(x):
        return flux.G(p(x))

    def d1(x):
        return flux.derivative(p(x), 1) * p.derivative(x, 1)

    def d2(x):
        v1 = p.derivative(x, 1)
        return flux.derivative(p(x), 2) * v1 ** 2 + flux.derivative(p(x), 1) * p.derivative(x, 2)

    def d3(x):
        v = p(x)
        v1, v2, v3 = (p.derivative(x, k) for k in (1, 2, 3))
        return (flux.derivative(v, 3) * v1 ** 3 + 3 * flux.derivative(v, 2) * v1 * v2
                + flux.derivative(v, 1) * v3)

    return Piece(f, (d1, d2, d3), label=f"G({p.label})")


def _invert_piece(flux: FluxMap, p: Piece) -> Piece:
    def f(x):
        return flux.G_inverse(p(x))

    def d1(x):
        return p.derivative(x, 1) / flux.G_prime(f(x))

    return Piece(f, (d1,), label=f"G^-1({p.label})")


def compose(flux: FluxMap, v: PiecewiseFunction) -> PiecewiseFunction:
    return PiecewiseFunction(v.breakpoints, [_compose_piece(flux, p) for p in v.pieces])


def _check_range(flux: FluxMap, v: PiecewiseFunction, span):
    xs = np.concatenate([np.linspace(-span, span, 2001)]
                        + [[b - 1e-9, b + 1e-9] for b in v.breakpoints if abs(b) <= span])
    vals = v(xs)
    if not np.all(flux.in_domain(vals)):
        bad = float(vals[~flux.in_domain(vals)][0])
        raise DomainError(f"initial value {bad!r} lies outside the flux domain {flux.domain}")
    if np.any(np.abs(flux.G_prime(vals)) < 1e-12):
        raise DomainError("degenerate flux: G' vanishes on the range of v0")


@dataclass(frozen=True)
class TransformedProblem:
    """Burgers-form data ``(f0, u0 = G o v0)`` with the flux kept for the way back."""

    f0: PiecewiseFunction
    u0: PiecewiseFunction
    v0: PiecewiseFunction
    flux: FluxMap
    riemann: RiemannData | None = None

    def as_data(self):
        return self.riemann if self.riemann is not None else SmoothData(self.f0, self.u0, "transformed")


def transform_problem(v0, g0=None, flux: FluxMap | None = None, span=20.0) -> TransformedProblem:
    """Map initial velocity ``v0`` to ``u0 = G(v0)``; ``g0`` is carried unchanged.

    ``v0`` may be a :class:`PiecewiseFunction` or constant-state
    :class:`RiemannData` whose velocity states are in ``v``.
    """
    flux = flux or preset_flux("identity")
    if isinstance(v0, RiemannData):
        data = v0
        if not data.is_constant:
            raise ConfigError("flux transform of Riemann data needs constant states")
        vl, vr = data.u1, data.u1 + data.u2
        if not np.all(flux.in_domain([vl, vr])):
            raise DomainError(f"Riemann states {vl!r}, {vr!r} lie outside the flux domain {flux.domain}")
        if np.any(np.abs(flux.G_prime([vl, vr])) < 1e-12):
            raise DomainError("degenerate flux: G' vanishes on the Riemann states")
        ul, ur = float(flux.G(vl)), float(flux.G(vr))
        new = replace(data, u1=ul, u2=ur - ul)
        return TransformedProblem(new.density(), new.velocity(), data.velocity(), flux, new)
    if not isinstance(v0, PiecewiseFunction):
        raise ConfigError("v0 must be a PiecewiseFunction or RiemannData")
    _check_range(flux, v0, span)
    f0 = g0 if g0 is not None else PiecewiseFunction.constant(1.0)
    if isinstance(f0, (int, float)):
        f0 = PiecewiseFunction.constant(f0)
    return TransformedProblem(f0, compose(flux, v0), v0, flux)


def back_transform(u_solution, flux: FluxMap):
    """Apply ``G^-1`` to the velocity part of a solution; densities and atoms pass through.

    Accepts a :class:`PiecewiseFunction` (returned lazily: evaluation raises on
    values outside the range of ``G``), an array of values, or any object with
    a ``velocity`` piecewise function or a ``u`` array.
    """
    if isinstance(u_solution, PiecewiseFunction):
        return PiecewiseFunction(u_solution.breakpoints, [_invert_piece(flux, p) for p in u_solution.pieces])
    if hasattr(u_solution, "velocity") and isinstance(getattr(u_solution, "velocity"), PiecewiseFunction):
        return replace(u_solution, velocity=back_transform(u_solution.velocity, flux))
    if hasattr(u_solution, "u") and isinstance(getattr(u_solution, "u"), np.ndarray):
        return replace(u_solution, u=flux.G_inverse(u_solution.u))
    return flux.G_inverse(u_solution)


# ---------------------------------------------------------------------------
# classical solutions before the gradient catastrophe

def characteristic_label(speed, t, x, span=50.0):
    """Unique label ``s`` with ``s + speed(s) t = x`` (monotone for ``t`` below blow-up)."""
    h = lambda s: s + float(speed(s)) * t - x
    lo, hi = x - span, x + span
    if h(lo) > 0 or h(hi) < 0:
        raise DomainError("characteristic root not bracketed; enlarge span")
    return brentq(h, lo, hi, xtol=1e-15, rtol=1e-15)


def classical_fields(f0, u0, t, x):
    """``(rho, u)`` of the pressureless system on the smooth region before blow-up."""
    s = characteristic_label(u0, t, x)
    jac = 1.0 + float(u0.derivative(s, 1)) * t
    if jac <= 0:
        raise DomainError("characteristics have crossed: past the gradient catastrophe")
    return float(f0(s)) / jac, float(u0(s))


def direct_solution(v0: PiecewiseFunction, flux: FluxMap, t, x):
    """``v(t, x)`` from the characteristics ``dx/dt = G(v)`` of the original law."""
    s = characteristic_label(lambda y: flux.G(v0(y)), t, x)
    return float(v0(s))


def transformed_solution(problem: TransformedProblem, t, x):
    """``(g, v)`` from the Burgers-form solve followed by the inverse map."""
    rho, u = classical_fields(problem.f0, problem.u0, t, x)
    return rho, float(problem.flux.G_inverse(u))


def law_residual(solution, flux: FluxMap, t, x, h=1e-4):
    """Central-difference residual of ``v_t + G(v) v_x`` for ``solution(t, x) -> v``."""
    v = solution(t, x)
    v_t = (solution(t + h, x) - solution(t - h, x)) / (2 * h)
    v_x = (solution(t, x + h) - solution(t, x - h)) / (2 * h)
    return float(v_t + flux.G(v) * v_x)


def density_residual(problem: TransformedProblem, t, x, h=1e-4):
    """Central-difference residual of ``g_t + (g G(v))_x`` on a smooth region."""
    flux = problem.flux

    def q(tv, xv):
        g, v = transformed_solution(problem, tv, xv)
        return g, g * float(flux.G(v))

    g_t = (q(t + h, x)[0] - q(t - h, x)[0]) / (2 * h)
    m_x = (q(t, x + h)[1] - q(t, x - h)[1]) / (2 * h)
    return float(g_t + m_x)
