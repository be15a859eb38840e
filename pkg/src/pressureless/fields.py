"""Piecewise-smooth initial data, line measures with atoms, and grids."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy

from .errors import ConfigError, DomainError

MAX_DERIV = 6


def _fd_step(x):
    return np.maximum(1e-6, 1e-8 * np.abs(x))


@dataclass(frozen=True)
class Piece:
    """One smooth branch of a :class:`PiecewiseFunction`.

    ``derivs[k]`` is the callable for the (k+1)-th derivative.  Missing
    derivatives fall back to finite differences.  All callables must accept
    numpy arrays.
    """

    f: Callable
    derivs: tuple = ()
    label: str = ""

    def __call__(self, x):
        return np.broadcast_to(np.asarray(self.f(x), dtype=float), np.shape(x)).copy()

    def derivative(self, x, order=1):
        if order == 0:
            return self(x)
        if order <= len(self.derivs) and self.derivs[order - 1] is not None:
            d = self.derivs[order - 1]
            return np.broadcast_to(np.asarray(d(x), dtype=float), np.shape(x)).copy()
        return _richardson(self, x, order)

    @classmethod
    def constant(cls, c):
        c = float(c)
        zero = lambda x: np.zeros(np.shape(x))
        return cls(lambda x: np.full(np.shape(x), c), (zero,) * MAX_DERIV, label=repr(c))

    @classmethod
    def linear(cls, slope, intercept):
        slope, intercept = float(slope), float(intercept)
        zero = lambda x: np.zeros(np.shape(x))
        return cls(
            lambda x: slope * np.asarray(x, dtype=float) + intercept,
            (lambda x: np.full(np.shape(x), slope),) + (zero,) * (MAX_DERIV - 1),
            label=f"{slope}*x+{intercept}",
        )

    @classmethod
    def from_expr(cls, expr, var="x"):
        """Build a piece and its first six derivatives from a sympy expression string."""
        x = sympy.Symbol(var)
        e = sympy.sympify(expr, locals={var: x})
        fns = []
        cur = e
        for _ in range(MAX_DERIV + 1):
            fns.append(sympy.lambdify(x, cur, "numpy"))
            cur = sympy.diff(cur, x)
        return cls(fns[0], tuple(fns[1:]), label=str(e))


def _richardson(piece, x, order):
    # central differences at h and h/2, one Richardson step
    x = np.asarray(x, dtype=float)
    h = _fd_step(x) * (10.0 ** (order - 1))

    def central(step):
        k = np.arange(order + 1)
        coeff = np.array([(-1) ** (order - j) * math.comb(order, j) for j in k], dtype=float)
        offsets = (k - order / 2.0)
        vals = [piece(x + o * step) for o in offsets]
        return sum(c * v for c, v in zip(coeff, vals)) / step ** order

    d1 = central(h)
    d2 = central(h / 2)
    return (4.0 * d2 - d1) / 3.0


class PiecewiseFunction:
    """Real function on the line given by smooth pieces between breakpoints.

    Piece ``i`` covers ``(b[i-1], b[i])``.  At a breakpoint the value is the
    mean of the one-sided limits.
    """

    def __init__(self, breakpoints: Sequence[float], pieces: Sequence[Piece], bound=None):
        bps = [float(b) for b in breakpoints]
        if len(pieces) != len(bps) + 1:
            raise ConfigError("number of pieces must equal number of breakpoints + 1")
        if any(not math.isfinite(b) for b in bps):
            raise ConfigError("breakpoints must be finite")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ConfigError("breakpoints must be strictly increasing")
        self.breakpoints = tuple(bps)
        self.pieces = tuple(p if isinstance(p, Piece) else Piece(p) for p in pieces)
        self.bound = bound

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, c):
        return cls([], [Piece.constant(c)])

    @classmethod
    def step(cls, left, right, at=0.0):
        return cls([at], [Piece.constant(left), Piece.constant(right)])

    @classmethod
    def from_exprs(cls, breakpoints, exprs):
        return cls(breakpoints, [Piece.from_expr(e) for e in exprs])

    @classmethod
    def from_samples(cls, xs, ys):
        """Order-1 interpolation of tabulated samples, constant extension outside."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or xs.size != ys.size:
            raise ConfigError("tabulated data needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ConfigError("tabulated abscissae must be strictly increasing")
        pieces = [Piece.constant(ys[0])]
        for i in range(xs.size - 1):
            slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            pieces.append(Piece.linear(slope, ys[i] - slope * xs[i]))
        pieces.append(Piece.constant(ys[-1]))
        return cls(list(xs), pieces)

    # evaluation -----------------------------------------------------------
    def piece_index(self, x):
        return np.searchsorted(np.asarray(self.breakpoints), x, side="right")

    def _eval(self, x, order):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        out = np.empty(xa.shape)
        idx = self.piece_index(xa)
        for i, p in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = p.derivative(xa[sel], order)
        if self.breakpoints:
            bps = np.asarray(self.breakpoints)
            pos = np.searchsorted(bps, xa)
            pos = np.clip(pos, 0, bps.size - 1)
            hit = bps[pos] == xa
            for j in np.nonzero(hit)[0]:
                k = pos[j]
                xv = xa[j:j + 1]
                out[j] = 0.5 * (self.pieces[k].derivative(xv, order)[0]
                                + self.pieces[k + 1].derivative(xv, order)[0])
        return float(out[0]) if scalar else out

    def __call__(self, x):
        return self._eval(x, 0)

    def derivative(self, x, order=1):
        return self._eval(x, order)

    def left_limit(self, b, order=0):
        k = self.breakpoints.index(b) if b in self.breakpoints else int(self.piece_index(b))
        return float(self.pieces[k].derivative(np.array([b]), order)[0])

    def right_limit(self, b, order=0):
        k = self.breakpoints.index(b) + 1 if b in self.breakpoints else int(self.piece_index(b))
        return float(self.pieces[k].derivative(np.array([b]), order)[0])

    def jumps(self, tol=1e-12):
        """Breakpoints where the one-sided limits differ: ``[(x, left, right)]``."""
        out = []
        for b in self.breakpoints:
            lv, rv = self.left_limit(b), self.right_limit(b)
            if abs(rv - lv) > tol * max(1.0, abs(lv), abs(rv)):
                out.append((b, lv, rv))
        return out

    def is_continuous(self, tol=1e-12):
        return not self.jumps(tol)

    def sup_norm(self, lo, hi, n=4001):
        if self.bound is not None:
            return float(self.bound)
        xs = np.concatenate([np.linspace(lo, hi, n), [b for b in self.breakpoints if lo <= b <= hi]])
        return float(np.max(np.abs(self(xs))))

    # algebra --------------------------------------------------------------
    def _locate(self, x):
        return self.pieces[int(self.piece_index(x))]

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = PiecewiseFunction.constant(other)
        bps = sorted(set(self.breakpoints) | set(other.breakpoints))
        edges = [-math.inf] + bps + [math.inf]
        pieces = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            probe = _probe(lo, hi)
            p, q = self._locate(probe), other._locate(probe)
            pieces.append(_sum_piece(p, q))
        return PiecewiseFunction(bps, pieces)

    __radd__ = __add__

    def scaled(self, c):
        c = float(c)
        return PiecewiseFunction(self.breakpoints, [_scale_piece(p, c) for p in self.pieces])

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def __repr__(self):
        labels = [p.label or "<fn>" for p in self.pieces]
        return f"PiecewiseFunction(breakpoints={list(self.breakpoints)}, pieces={labels})"


def _probe(lo, hi):
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


def _sum_piece(p, q):
    derivs = tuple(
        (lambda x, k=k: p.derivative(x, k) + q.derivative(x, k)) for k in range(1, MAX_DERIV + 1)
    )
    return Piece(lambda x: p(x) + q(x), derivs, label=f"({p.label})+({q.label})")


def _scale_piece(p, c):
    derivs = tuple((lambda x, k=k: c * p.derivative(x, k)) for k in range(1, MAX_DERIV + 1))
    return Piece(lambda x: c * p(x), derivs, label=f"{c}*({p.label})")


# ---------------------------------------------------------------------------
# mollification

def _bridge(f, epsilon, shape):
    jumps = f.jumps()
    if not jumps:
        return f
    centres = [j[0] for j in jumps]
    for c1, c2 in zip(centres, centres[1:]):
        if c2 - c1 <= 2 * epsilon:
            raise ConfigError("epsilon too large for jump separation")
    keep = [b for b in f.breakpoints if all(abs(b - c) >= epsilon for c in centres)]
    new_bps = sorted(keep + [c - epsilon for c in centres] + [c + epsilon for c in centres])
    bridges = {}
    for c in centres:
        lv = float(f(c - epsilon))
        rv = float(f(c + epsilon))
        bridges[c - epsilon] = _bridge_piece(c, epsilon, lv, rv, shape)
    edges = [-math.inf] + new_bps + [math.inf]
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo in bridges and abs(hi - lo - 2 * epsilon) < 1e-12 * max(1.0, abs(hi)):
            pieces.append(bridges[lo])
        else:
            pieces.append(f._locate(_probe(lo, hi)))
    return PiecewiseFunction(new_bps, pieces)


def _bridge_piece(c, eps, lv, rv, shape):
    jump = rv - lv
    if shape == "linear":
        slope = jump / (2 * eps)
        return Piece.linear(slope, lv + jump / 2 - slope * c)
    if shape == "smoothstep":
        def tau(x):
            return (np.asarray(x, dtype=float) - (c - eps)) / (2 * eps)

        def f(x):
            s = tau(x)
            return lv + jump * s * s * (3 - 2 * s)

        def d1(x):
            s = tau(x)
            return jump * 6 * s * (1 - s) / (2 * eps)

        def d2(x):
            s = tau(x)
            return jump * (6 - 12 * s) / (2 * eps) ** 2

        def d3(x):
            return np.full(np.shape(x), -12 * jump / (2 * eps) ** 3)

        zero = lambda x: np.zeros(np.shape(x))
        return Piece(f, (d1, d2, d3, zero, zero, zero), label="smoothstep")
    raise ConfigError(f"unknown bridge shape {shape!r}")


def mollify(f: PiecewiseFunction, epsilon: float, shape="linear") -> PiecewiseFunction:
    """Replace every jump by a continuous bridge on ``(x_j - eps, x_j + eps)``.

    ``shape="linear"`` is the piecewise-linear monotone approximation;
    ``"smoothstep"`` uses the cubic ``3s^2 - 2s^3`` and is used to compare two
    monotone approximations of the same data.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    return _bridge(f, float(epsilon), shape)


def approximate_atom(amplitude: float, center: float, epsilon: float) -> PiecewiseFunction:
    """Gaussian ``a (2 pi eps)^{-1/2} exp(-(x-c)^2 / (2 eps))`` approximating ``a delta_c``.

    The breakpoints carry no jumps; they only mark the core of the bump so
    that quadrature splits there.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    a, c, e = float(amplitude), float(center), float(epsilon)
    norm = a / math.sqrt(2 * math.pi * e)

    def g(x):
        z = (np.asarray(x, dtype=float) - c)
        return norm * np.exp(-z * z / (2 * e))

    def d1(x):
        z = np.asarray(x, dtype=float) - c
        return -z / e * g(x)

    def d2(x):
        z = np.asarray(x, dtype=float) - c
        return (z * z / e ** 2 - 1 / e) * g(x)

    piece = Piece(g, (d1, d2), label=f"atom({a},{c},{e})")
    r = math.sqrt(e)
    bps = [c + k * r for k in (-20, -8, -3, -1, 0, 1, 3, 8, 20)]
    return PiecewiseFunction(bps, [piece] * (len(bps) + 1))


# ---------------------------------------------------------------------------
# measures and data

@dataclass(frozen=True)
class LineMeasure:
    """Regular density plus finitely many Dirac atoms ``(position, amplitude)``."""

    regular: PiecewiseFunction
    atoms: tuple = ()
    allow_signed: bool = False

    def __post_init__(self):
        merged = {}
        for pos, amp in self.atoms:
            if amp < 0 and not self.allow_signed:
                raise ConfigError("atom amplitudes must be non-negative")
            merged[float(pos)] = merged.get(float(pos), 0.0) + float(amp)
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))

    def mass(self, a, b, tol=1e-10):
        """Mass of the closed interval ``[a, b]``."""
        from .quadrature import integrate

        bps = [a] + [x for x in self.regular.breakpoints if a < x < b] + [b]
        reg, _ = integrate(self.regular, bps, tol=tol)
        return reg + sum(amp for pos, amp in self.atoms if a <= pos <= b)

    def integrate(self, phi, a, b, tol=1e-10):
        from .quadrature import integrate

        bps = [a] + [x for x in self.regular.breakpoints if a < x < b] + [b]
        reg, _ = integrate(lambda x: self.regular(x) * phi(x), bps, tol=tol)
        return reg + sum(amp * float(phi(np.array([pos]))[0]) for pos, amp in self.atoms if a <= pos <= b)


def _as_function(v):
    if isinstance(v, PiecewiseFunction):
        return v
    if isinstance(v, Piece):
        return PiecewiseFunction([], [v])
    if callable(v):
        return PiecewiseFunction([], [Piece(v)])
    return PiecewiseFunction.constant(float(v))


@dataclass(frozen=True)
class RiemannData:
    """Left state ``(f1, u1)``, jump ``(f2, u2)`` across ``x0`` and atom ``f3`` at ``x0``.

    States are either real constants or function-valued (anything accepted by
    :class:`PiecewiseFunction`).  The density is ``f1 + f2 H(x - x0) + f3 delta``.
    """

    f1: object
    f2: object
    u1: object
    u2: object
    f3: float = 0.0
    x0: float = 0.0
    allow_negative_atom: bool = False

    def __post_init__(self):
        if self.f3 < 0 and not self.allow_negative_atom:
            raise ConfigError("negative atom amplitude requires allow_negative_atom=True")
        if self.is_constant:
            if not self.f1 > 0:
                raise ConfigError("left density f1 must be positive")
            if not self.f1 + self.f2 > 0:
                raise ConfigError("right density f1 + f2 must be positive")

    @property
    def is_constant(self):
        return all(isinstance(v, (int, float)) for v in (self.f1, self.f2, self.u1, self.u2))

    def _combine(self, left, jump):
        lf, jf = _as_function(left), _as_function(jump)
        x0 = float(self.x0)
        edges = sorted(set(lf.breakpoints) | set(jf.breakpoints) | {x0})
        bounds = [-math.inf] + edges + [math.inf]
        pieces = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            probe = _probe(lo, hi)
            p = lf._locate(probe)
            if probe > x0:
                p = _sum_piece(p, jf._locate(probe))
            pieces.append(p)
        return PiecewiseFunction(edges, pieces)

    def density(self) -> PiecewiseFunction:
        """Regular part of the initial density."""
        if self.is_constant:
            return PiecewiseFunction.step(self.f1, self.f1 + self.f2, self.x0)
        return self._combine(self.f1, self.f2)

    def velocity(self) -> PiecewiseFunction:
        if self.is_constant:
            return PiecewiseFunction.step(self.u1, self.u1 + self.u2, self.x0)
        return self._combine(self.u1, self.u2)

    def measure(self) -> LineMeasure:
        atoms = ((self.x0, self.f3),) if self.f3 != 0 else ()
        return LineMeasure(self.density(), atoms, allow_signed=self.allow_negative_atom)

    def one_sided(self):
        """``(f_left, f_right, u_left, u_right)`` at ``x0``."""
        f, u = self.density(), self.velocity()
        return (f.left_limit(self.x0), f.right_limit(self.x0),
                u.left_limit(self.x0), u.right_limit(self.x0))

    def mollified(self, epsilon, shape="linear"):
        """``(f0_eps, u0_eps)`` including the Gaussian approximation of the atom."""
        f = mollify(self.density(), epsilon, shape)
        u = mollify(self.velocity(), epsilon, shape)
        if self.f3 != 0:
            f = f + approximate_atom(self.f3, self.x0, epsilon)
        return f, u


@dataclass(frozen=True)
class Grid:
    t: float
    xs: np.ndarray = field(repr=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if not self.t >= 0:
            raise ConfigError("grid time must be non-negative")
        if xs.ndim != 1 or xs.size == 0:
            raise ConfigError("grid needs a non-empty 1-D coordinate array")
        if not np.all(np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
            raise ConfigError("grid coordinates must be finite and strictly increasing")
        object.__setattr__(self, "xs", xs)

    @classmethod
    def linspace(cls, t, lo, hi, n):
        return cls(t, np.linspace(lo, hi, int(n)))


# ---------------------------------------------------------------------------
# presets

@dataclass(frozen=True)
class SmoothData:
    """Initial density and velocity without a designated jump."""

    f0: PiecewiseFunction
    u0: PiecewiseFunction
    name: str = ""


def preset(name: str, **params):
    """Named initial data.

    ``heaviside-riemann`` -> :class:`RiemannData`; ``tanh``, ``arctan``,
    ``linear-plateau``, ``cubic`` -> :class:`SmoothData`.
    """
    p = {k: float(v) for k, v in params.items()}
    if name in ("heaviside-riemann", "riemann"):
        return RiemannData(p.get("f1", 1.0), p.get("f2", 0.0), p.get("u1", 0.0),
                           p.get("u2", -1.0), p.get("f3", 0.0), p.get("x0", 0.0))
    density = p.get("rho", 1.0)
    f0 = PiecewiseFunction.constant(density)
    if name == "tanh":
        a, w = p.get("amp", 1.0), p.get("width", 1.0)
        return SmoothData(f0, PiecewiseFunction([], [Piece.from_expr(f"-{a}*tanh(x/{w})")]), name)
    if name == "arctan":
        a, w = p.get("amp", 1.0), p.get("width", 1.0)
        return SmoothData(f0, PiecewiseFunction([], [Piece.from_expr(f"-{a}*atan(x/{w})")]), name)
    if name == "cubic":
        return SmoothData(f0, PiecewiseFunction([], [Piece.from_expr("-x + x**3")]), name)
    if name == "linear-plateau":
        h = p.get("half", 1.0)
        u0 = PiecewiseFunction([-h, h], [Piece.constant(h), Piece.linear(-1.0, 0.0), Piece.constant(-h)])
        return SmoothData(f0, u0, name)
    raise ConfigError(f"unknown data preset {name!r}")


def load_table(path):
    """Tabulated initial data: CSV with columns ``x,f,u`` (header optional)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                rows.append([float(v) for v in parts[:3]])
            except ValueError:
                continue
    if len(rows) < 2:
        raise ConfigError(f"{path}: need at least two data rows")
    arr = np.asarray(rows)
    if np.any(arr[:, 1] < 0):
        raise ConfigError(f"{path}: negative density")
    return SmoothData(PiecewiseFunction.from_samples(arr[:, 0], arr[:, 1]),
                      PiecewiseFunction.from_samples(arr[:, 0], arr[:, 2]), str(path))


def check_nonnegative(f: PiecewiseFunction, lo, hi, n=2001):
    xs = np.linspace(lo, hi, n)
    if np.any(f(xs) < -1e-14):
        raise DomainError("density must be non-negative")
