"""Jump conditions, entropy inequality and the velocity-dispersion pressure.

Residuals are computed in exact rational arithmetic from the analytic
one-sided states; floats in the input data are converted exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import sympy

from .errors import ConfigError
from .fields import RiemannData


def _q(v):
    return Fraction(v)


@dataclass(frozen=True)
class JumpAudit:
    position: object
    speed: object
    jump_f: object
    jump_fu: object
    jump_fu2: object
    jump_p: object
    rh_mass_residual: object
    rh_momentum_residual: object
    label: str = ""

    @property
    def passes(self):
        return self.rh_mass_residual == 0 and self.rh_momentum_residual == 0


def pressure_level(data: RiemannData):
    """``f1 (f1 + f2) u2^2 / (2 f1 + f2)`` for compressive data, else 0 (exact)."""
    f1, f2, u2 = _q(data.f1), _q(data.f2), _q(data.u2)
    if u2 >= 0:
        return Fraction(0)
    return f1 * (f1 + f2) * u2 * u2 / (2 * f1 + f2)


def spurious_pressure(data: RiemannData, t, x):
    """Dispersion pressure of the free-particle solution; half the level at the edges."""
    if not data.is_constant:
        raise ConfigError("spurious pressure is defined for constant states")
    lvl = float(pressure_level(data))
    lo = data.x0 + (data.u1 + data.u2) * t
    hi = data.x0 + data.u1 * t

    def one(xv):
        if lvl == 0:
            return 0.0
        if lo < xv < hi:
            return lvl
        if xv == lo or xv == hi:
            return lvl / 2
        return 0.0

    xa = np.asarray(x, dtype=float)
    if xa.ndim == 0:
        return one(float(xa))
    return np.array([one(float(v)) for v in xa])


def fp_states(data: RiemannData):
    """Exact states ``[(f, u, p), ...]`` left to right and jump speeds of the FP limit.

    In the rarefaction fan the velocity is ``x/t``; at its edges it equals the
    adjacent constant, which is all the jump conditions need.
    """
    f1, f2, u1, u2 = (_q(v) for v in (data.f1, data.f2, data.u1, data.u2))
    if u2 > 0:
        states = [(f1, u1, 0), (Fraction(0), u1, 0), (Fraction(0), u1 + u2, 0), (f1 + f2, u1 + u2, 0)]
        # jumps at u1 t (between states 0,1) and (u1+u2) t (between 2,3)
        return [(states[0], states[1], u1, "left edge of fan"),
                (states[2], states[3], u1 + u2, "right edge of fan")]
    if u2 < 0:
        um = u1 + (f1 + f2) / (2 * f1 + f2) * u2
        p = pressure_level(data)
        left, mid, right = (f1, u1, 0), (2 * f1 + f2, um, p), (f1 + f2, u1 + u2, 0)
        return [(left, mid, u1 + u2, "left edge of overlap"),
                (mid, right, u1, "right edge of overlap")]
    return [((f1, u1, 0), (f1 + f2, u1, 0), u1, "contact")]


def _audit(left, right, speed, with_pressure, label, mdot=0, dmom=0):
    fl, ul, pl = left
    fr, ur, pr = right
    if not with_pressure:
        pl = pr = 0
    jf = fr - fl
    jfu = fr * ur - fl * ul
    jfu2 = fr * ur * ur - fl * ul * ul
    jp = pr - pl
    return JumpAudit(None, speed, jf, jfu, jfu2, jp,
                     jf * speed - jfu - mdot,
                     jfu * speed - (jfu2 + jp) - dmom, label)


def audit_fp(data: RiemannData, t, with_pressure=True):
    """Jump audits of the free-particle limit of constant-state Riemann data."""
    t = _q(t)
    x0 = _q(data.x0)
    out = []
    for left, right, speed, label in fp_states(data):
        a = _audit(left, right, speed, with_pressure, label)
        out.append(replace(a, position=x0 + speed * t))
    return out


def audit_sticky(data: RiemannData, t):
    """Generalized jump conditions of the closed-form delta-shock at time ``t``.

    With cluster mass ``m`` and speed ``D`` the residuals are
    ``m' - ([f] D - [fu])`` and ``(m D)' - ([fu] D - [fu^2])``, evaluated
    symbolically along the exact trajectory (rational data, exact time).
    """
    f1, f2, u1, u2, f3 = (sympy.Rational(_q(v).numerator, _q(v).denominator)
                          for v in (data.f1, data.f2, data.u1, data.u2, data.f3))
    ts = sympy.Symbol("t", positive=True)
    jf = f2
    juf = (u1 + u2) * (f1 + f2) - u1 * f1
    ju2f = (u1 + u2) ** 2 * (f1 + f2) - u1 ** 2 * f1
    if jf != 0:
        m = sympy.sqrt(f3 ** 2 - 2 * juf * f3 * ts + (juf ** 2 - jf * ju2f) * ts ** 2)
        x = (juf * ts - f3 + m) / jf
    else:
        x = ju2f * ts ** 2 / (2 * (juf * ts - f3))
        m = -juf * ts + f3
    D = sympy.diff(x, ts)
    mass_law = sympy.simplify(m - (-juf * ts + jf * x + f3))
    r_mass = sympy.simplify(sympy.diff(m, ts) - (jf * D - juf))
    r_mom = sympy.simplify(sympy.diff(m * D, ts) - (juf * D - ju2f))
    tq = sympy.Rational(_q(t).numerator, _q(t).denominator)
    sub = lambda e: sympy.nsimplify(sympy.simplify(e.subs(ts, tq)))
    left = (f1, u1)
    right = (f1 + f2, u1 + u2)
    audit = JumpAudit(sub(x) + sympy.Rational(_q(data.x0).numerator, _q(data.x0).denominator),
                      sub(D), jf, juf, ju2f, 0, sub(r_mass), sub(r_mom), "delta-shock")
    return audit, {"mass_law": mass_law, "mass": r_mass, "momentum": r_mom,
                   "states": (left, right)}


def entropy_check(velocity, t, x1, x2):
    """``(ok, margin)`` for ``(u(x2) - u(x1)) / (x2 - x1) <= 1/t``."""
    if not t > 0:
        raise ConfigError("time must be positive")
    if x1 == x2:
        raise ConfigError("entropy check needs two distinct points")
    u1 = float(velocity(x1))
    u2 = float(velocity(x2))
    q = (u2 - u1) / (x2 - x1)
    margin = 1.0 / t - q
    return q <= 1.0 / t + 1e-12, margin


def entropy_audit(velocity, t, x_jump, gaps=None):
    """Entropy check on 21 pairs straddling ``x_jump`` with gaps 1e-6 .. 1e-1."""
    gaps = np.geomspace(1e-6, 1e-1, 21) if gaps is None else gaps
    results = [entropy_check(velocity, t, x_jump - g / 2, x_jump + g / 2) for g in gaps]
    return all(ok for ok, _ in results), min(m for _, m in results)
