"""Closed-form kernel fields and limit solutions for constant-state Riemann data.

The mollified data is ``f1 | linear bridge on (-eps, eps) | f1 + f2`` and the
same for the velocity, plus an optional Gaussian atom of variance ``eps``.
Every kernel integral over a constant piece is a Gaussian CDF; over the bridge
the integrand is a polynomial times a Gaussian in the scaled variable
``p = g / (sigma sqrt t)`` and integrates exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError
from .fields import Piece, PiecewiseFunction, RiemannData

SQRT2PI = math.sqrt(2 * math.pi)


def Phi(z):
    """Standard normal CDF, saturating to 0/1 beyond |z| = 38."""
    z = np.clip(np.asarray(z, dtype=float), -38.0, 38.0)
    out = ndtr(z)
    return float(out) if out.ndim == 0 else out


def _gauss(z):
    return math.exp(-0.5 * z * z) if abs(z) < 40 else 0.0


def _require_constant(data: RiemannData):
    if not isinstance(data, RiemannData) or not data.is_constant:
        raise ConfigError("closed forms need constant-state Riemann data")


@dataclass(frozen=True)
class MollifiedRiemannTerms:
    """Intermediate quantities of the closed-form kernel fields at one ``(t, x)``."""

    C_minus: float
    C_plus: float
    F_eps: float
    L_eps: float
    N_eps: float
    K_eps: float
    I1: float
    I2: float
    A_se: float = math.nan
    B_se: float = math.nan
    K_plus_se: float = math.nan
    K_minus_se: float = math.nan
    D1_se: float = math.nan
    D2_se: float = math.nan
    J2: float = 0.0
    J3: float = 0.0
    rho_reg: float = math.nan
    rho_sing: float = 0.0
    momentum: float = math.nan

    @property
    def rho(self):
        return self.rho_reg + self.rho_sing

    @property
    def u_hat(self):
        return self.momentum / self.rho


def mollified_terms(data: RiemannData, eps, sigma, t, x) -> MollifiedRiemannTerms:
    _require_constant(data)
    if not (eps > 0 and sigma > 0):
        raise ConfigError("eps and sigma must be positive")
    if not t > 0:
        raise DomainError("time must be positive")
    f1, f2, u1, u2, f3 = (float(v) for v in (data.f1, data.f2, data.u1, data.u2, data.f3))
    x = float(x) - data.x0
    den = u2 * t + 2 * eps
    if abs(den) <= 1e-14 * max(abs(u2 * t), 2 * eps):
        raise DomainError("degenerate overlap: u2 t + 2 eps = 0, perturb eps")
    a = den / (2 * eps)
    b = (u1 + u2 / 2) * t - x
    st = sigma * math.sqrt(t)
    Cm = u1 * t - x - eps
    Cp = (u1 + u2) * t - x + eps
    Pm, Pp = Cm / st, Cp / st
    em, ep = _gauss(Pm), _gauss(Pp)
    dPhi = Phi(Pp) - Phi(Pm)

    # bridge: f0 = beta0 + beta1 p, u0 - u1 = alpha0 + alpha1 p
    beta1 = f2 * st / (2 * eps * a)
    beta0 = f1 + f2 / 2 - f2 * b / (2 * eps * a)
    alpha1 = u2 * st / (2 * eps * a)
    alpha0 = u2 / 2 - u2 * b / (2 * eps * a)
    F = beta0 / a
    L = -math.sqrt(2 * t) * f2 * eps / (math.sqrt(math.pi) * den ** 2)
    I1 = beta1 / (SQRT2PI * a) * (em - ep) + F * dPhi
    N = alpha0 * F
    K = u2 * math.sqrt(t) / (SQRT2PI * den) * F   # the undefined companion term is taken as zero
    second = Pm * em - Pp * ep + SQRT2PI * dPhi
    I2 = (alpha1 * beta1 * second + (alpha1 * beta0 + alpha0 * beta1) * (em - ep)
          + alpha0 * beta0 * SQRT2PI * dPhi) / (SQRT2PI * a)
    right = (f1 + f2) * Phi(-Pp)
    rho_reg = f1 * Phi(Pm) + right + I1
    mom = u1 * rho_reg + u2 * right + I2

    extra = {}
    if f3 != 0:
        S = sigma * sigma * t + eps
        c1 = u1 * t - x
        c2 = (u1 + u2) * t - x
        D1 = c1 * math.sqrt(eps) / math.sqrt(S) - math.sqrt(eps * S)
        D2 = c2 * math.sqrt(eps) / math.sqrt(S) + math.sqrt(eps * S)
        G1 = math.exp(-c1 * c1 / (2 * S))
        G2 = math.exp(-c2 * c2 / (2 * S))
        A = sigma * sigma * t + eps * a * a
        B = eps * a * b / math.sqrt(A)
        Kp = (math.sqrt(A) * eps + B) / math.sqrt(eps)
        Km = (-math.sqrt(A) * eps + B) / math.sqrt(eps)
        G = math.exp(-b * b / (2 * A))
        piece1 = f3 / math.sqrt(2 * math.pi * S) * G1 * Phi(D1 / st)
        piece2 = f3 / math.sqrt(2 * math.pi * S) * G2 * Phi(-D2 / st)
        J2 = f3 / (SQRT2PI * math.sqrt(A)) * G * (Phi(Kp / st) - Phi(Km / st))
        # first moment of the label over the bridge, weighted by the atom kernel
        mu = -a * b * eps / A
        var = eps * sigma * sigma * t / A
        pref = f3 / (math.sqrt(2 * math.pi * eps) * SQRT2PI * math.sqrt(t) * sigma) * G
        s_moment = mu * J2 + pref * var * (_gauss(Km / st) - _gauss(Kp / st))
        J3 = u2 / 2 * J2 + u2 / (2 * eps) * s_moment
        rho_sing = piece1 + piece2 + J2
        mom += u1 * rho_sing + u2 * piece2 + J3
        extra = dict(A_se=A, B_se=B, K_plus_se=Kp, K_minus_se=Km, D1_se=D1, D2_se=D2,
                     J2=J2, J3=J3, rho_sing=rho_sing)
    return MollifiedRiemannTerms(Cm, Cp, F, L, N, K, I1, I2, rho_reg=rho_reg, momentum=mom, **extra)


def rho_eps_sigma_closed(data: RiemannData, eps, sigma, t, x):
    """Kernel density of the mollified data, regular plus atom part."""
    return _map(lambda xv: mollified_terms(data, eps, sigma, t, xv).rho, x)


def u_eps_sigma_closed(data: RiemannData, eps, sigma, t, x):
    """Conditional velocity of the mollified data."""
    return _map(lambda xv: mollified_terms(data, eps, sigma, t, xv).u_hat, x)


def singular_closed_forms(data: RiemannData, eps, sigma, t, x):
    """``(rho_sing, u_hat)``: the atom's share of the density and the full velocity."""
    m = mollified_terms(data, eps, sigma, t, x)
    return m.rho_sing, m.u_hat


def _map(fn, x):
    xa = np.asarray(x, dtype=float)
    if xa.ndim == 0:
        return fn(float(xa))
    return np.array([fn(float(v)) for v in xa])


# ---------------------------------------------------------------------------
# limits

def _snap(x, bps):
    for b in bps:
        if abs(x - b) < 1e-12 * max(1.0, abs(x)):
            return b
    return x


@dataclass(frozen=True)
class RiemannFPResult:
    """Exact free-particle limit at time ``t``.

    ``density`` and ``velocity`` are piecewise functions whose breakpoint
    values are the means of the adjacent states.
    """

    t: float
    density: PiecewiseFunction
    velocity: PiecewiseFunction
    atoms: tuple = ()
    regime: str = "rarefaction"
    flags: tuple = field(default_factory=tuple)

    @property
    def breakpoints(self):
        return self.density.breakpoints

    def rho(self, x):
        return _map(lambda v: float(self.density(_snap(v, self.breakpoints))), x)

    def u(self, x):
        return _map(lambda v: float(self.velocity(_snap(v, self.velocity.breakpoints))), x)


def middle_velocity(data: RiemannData):
    f1, f2, u1, u2 = data.f1, data.f2, data.u1, data.u2
    return u1 + (f1 + f2) / (2 * f1 + f2) * u2


def riemann_fp(data: RiemannData, t) -> RiemannFPResult:
    """Free-particle limit (sigma -> 0, then eps -> 0) of constant-state Riemann data."""
    _require_constant(data)
    if not t > 0:
        raise DomainError("time must be positive")
    f1, f2, u1, u2, f3, x0 = (float(v) for v in (data.f1, data.f2, data.u1, data.u2, data.f3, data.x0))
    xl = x0 + u1 * t
    xr = x0 + (u1 + u2) * t
    if u2 == 0:
        dens = PiecewiseFunction.step(f1, f1 + f2, xl)
        vel = PiecewiseFunction.constant(u1)
        atoms = ((xl, f3),) if f3 else ()
        return RiemannFPResult(t, dens, vel, atoms, "contact", ("no wave",))
    atoms = ((xl, f3 / 2), (xr, f3 / 2)) if f3 else ()
    if u2 > 0:
        dens = PiecewiseFunction([xl, xr], [Piece.constant(f1), Piece.constant(0.0), Piece.constant(f1 + f2)])
        ramp = Piece.linear(1.0 / t, -x0 / t)
        vel = PiecewiseFunction([xl, xr], [Piece.constant(u1), ramp, Piece.constant(u1 + u2)])
        return RiemannFPResult(t, dens, vel, atoms, "rarefaction")
    um = middle_velocity(data)
    dens = PiecewiseFunction([xr, xl], [Piece.constant(f1), Piece.constant(2 * f1 + f2),
                                        Piece.constant(f1 + f2)])
    vel = PiecewiseFunction([xr, xl], [Piece.constant(u1), Piece.constant(um), Piece.constant(u1 + u2)])
    return RiemannFPResult(t, dens, vel, atoms, "compression")


def order_swapped_velocity(data: RiemannData, t) -> PiecewiseFunction:
    """Velocity obtained when the eps-limit is taken before the sigma-limit.

    A single jump from ``u1`` to ``u1 + u2`` at ``x0 + (u1 + u2/2) t``.
    """
    _require_constant(data)
    return PiecewiseFunction.step(data.u1, data.u1 + data.u2, data.x0 + (data.u1 + data.u2 / 2) * t)
