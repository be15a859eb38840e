"""Sticky-particle reduction: one delta-shock collects the overlapping domain.

A cluster at ``x_j(t)`` has absorbed every particle label between the outer
roots ``S-(t) <= S+(t)`` of ``u0(s) t + s = x_j(t)``.  Mass and momentum of
the cluster are therefore label integrals::

    m(t) = f3 + int_{S-}^{S+} f0(s) ds,    m(t) x_j'(t) = int_{S-}^{S+} f0 u0 ds

(the initial atom ``f3`` sits at rest).  For constant states this gives the
closed-form trajectory below; otherwise the ODE is integrated with RK4.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, GeometryError
from .fields import PiecewiseFunction, RiemannData
from .quadrature import bisect_vec, integrate

VANISH = "mass vanishes: re-pose Riemann problem at x_j(t*)"
DIVERGE = "trajectory diverges: mass reaches zero with negative atom"


@dataclass(frozen=True)
class JumpState:
    t: float
    x_j: float
    m: float
    v: float
    lax_low: float = math.nan
    lax_high: float = math.nan
    flags: tuple = ()

    @property
    def lax_ok(self):
        return self.lax_low < self.v < self.lax_high


def jumps(data: RiemannData):
    """``([f], [uf], [u^2 f])`` across the initial discontinuity."""
    f1, f2, u1, u2 = (float(v) for v in (data.f1, data.f2, data.u1, data.u2))
    fr, ur = f1 + f2, u1 + u2
    return f2, ur * fr - u1 * f1, ur * ur * fr - u1 * u1 * f1


def discriminant(data: RiemannData, t):
    jf, juf, ju2f = jumps(data)
    f3 = float(data.f3)
    return f3 * f3 - 2 * juf * f3 * t + (juf * juf - jf * ju2f) * t * t


def vanishing_time(data: RiemannData):
    """First ``t > 0`` at which the cluster mass reaches zero, or ``inf``."""
    jf, juf, ju2f = jumps(data)
    f3 = float(data.f3)
    if jf == 0:
        m_slope = -juf
        if f3 == 0:
            return math.inf
        tv = -f3 / m_slope if m_slope != 0 else math.inf
        return tv if tv > 0 else math.inf
    Q = juf * juf - jf * ju2f
    a, b, c = Q, -2 * juf * f3, f3 * f3
    roots = []
    if a == 0:
        if b != 0:
            roots = [-c / b]
    else:
        d = b * b - 4 * a * c
        if d >= 0:
            sq = math.sqrt(d)
            roots = [(-b - sq) / (2 * a), (-b + sq) / (2 * a)]
    pos = [r for r in roots if r > 1e-15]
    if f3 == 0:
        return math.inf
    return min(pos) if pos else math.inf


def _constant_state(data, t):
    jf, juf, ju2f = jumps(data)
    f3 = float(data.f3)
    x0 = float(data.x0)
    if jf != 0:
        disc = discriminant(data, t)
        if disc < 0:
            raise DomainError("negative discriminant: inconsistent data for a single delta-shock")
        m = math.sqrt(disc)
        a = juf * t - f3
        # (a + m)/[f] == [u^2 f] t^2 / (a - m); pick the form without cancellation
        x = (a + m) / jf if a >= 0 else ju2f * t * t / (a - m)
        if m > 0:
            v = (juf * x - ju2f * t) / m
        else:
            Q = juf * juf - jf * ju2f
            mdot = math.sqrt(Q) if f3 == 0 and Q >= 0 else math.nan
            v = (juf + mdot) / jf
    else:
        den = 2 * (juf * t - f3)
        if den == 0:
            raise DomainError("denominator vanishes: cluster mass is zero")
        x = ju2f * t * t / den
        v = (2 * ju2f * t * den - ju2f * t * t * 2 * juf) / den ** 2
        m = -juf * t + f3
    return x0 + x, m, v


def jump_trajectory_constant(data: RiemannData, t) -> JumpState:
    """Closed-form delta-shock at time ``t`` for constant states with ``u2 < 0``."""
    if not data.is_constant:
        raise ConfigError("closed-form trajectory needs constant states")
    if not data.u2 < 0:
        raise ConfigError("a delta-shock needs compressive data (u2 < 0)")
    if t < 0:
        raise DomainError("time must be non-negative")
    flags = ()
    if discriminant(data, 0.0) < 0:
        raise DomainError("negative discriminant: inconsistent data for a single delta-shock")
    tv = vanishing_time(data)
    if t >= tv:
        t = tv
        jf, _, _ = jumps(data)
        flags = (VANISH,) if jf != 0 or data.f3 >= 0 else (DIVERGE,)
    if t == 0:
        x, m = float(data.x0), float(data.f3)
        v = _initial_velocity_constant(data)
    elif flags and jumps(data)[0] == 0:
        # [f] = 0 with vanishing mass: the trajectory is unbounded there
        return JumpState(t, math.copysign(math.inf, jumps(data)[2]), 0.0, math.nan,
                         data.u1 + data.u2, data.u1, flags)
    else:
        x, m, v = _constant_state(data, t)
        if flags:
            m, v = 0.0, math.nan
    return JumpState(t, x, m, v, float(data.u1 + data.u2), float(data.u1), flags)


def _initial_velocity_constant(data):
    if data.f3 > 0:
        return 0.0
    jf, juf, ju2f = jumps(data)
    if jf == 0:
        return ju2f / (2 * juf)
    Q = juf * juf - jf * ju2f
    return (juf + math.sqrt(Q)) / jf


def generalized_rh_residuals(data: RiemannData, t):
    """Residuals of ``m = -[uf] t + [f] x + f3`` and ``m x' = [uf] x - [u^2 f] t`` (positions relative to x0)."""
    st = jump_trajectory_constant(data, t)
    jf, juf, ju2f = jumps(data)
    x = st.x_j - data.x0
    return (st.m - (-juf * t + jf * x + data.f3),
            st.m * st.v - (juf * x - ju2f * t))


# ---------------------------------------------------------------------------
# general solver

@dataclass(frozen=True)
class OverlapGeometry:
    x_minus: float
    x_plus: float
    s_branches: tuple
    segment_atoms: tuple = ()


class StickySolver:
    """RK4 integration of the cluster trajectory for piecewise-smooth data.

    ``jump`` marks a compressive discontinuity of ``u0`` (Riemann data); for
    smooth data the cluster is started at a blow-up point.  ``reading``
    selects how branch densities are weighted: ``"jacobian"`` integrates over
    particle labels, ``"literal"`` integrates ``f0`` of the branch label over
    ``x`` without the change-of-variables factor.
    """

    def __init__(self, f0: PiecewiseFunction, u0: PiecewiseFunction, f3=0.0, jump=None,
                 L=20.0, reading="jacobian", quad_tol=1e-12, max_halvings=40):
        if reading not in ("jacobian", "literal"):
            raise ConfigError("reading must be 'jacobian' or 'literal'")
        self.f0, self.u0, self.f3 = f0, u0, float(f3)
        self.jump = None if jump is None else float(jump)
        self.L = float(L)
        self.reading = reading
        self.quad_tol = quad_tol
        self.max_halvings = max_halvings
        cuts = sorted({b for b in f0.breakpoints + u0.breakpoints if -L < b < L})
        edges = [-L] + cuts + [L]
        s_parts, d_parts = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            piece = u0.pieces[int(u0.piece_index(0.5 * (a + b)))]
            s = np.linspace(a, b, 4000)[1:-1]
            s_parts.append(s)
            d_parts.append(piece.derivative(s, 1))
        self._s = np.concatenate(s_parts)
        self._du = np.concatenate(d_parts)
        self._breaks = cuts

    @classmethod
    def from_riemann(cls, data: RiemannData, **kw):
        ul, ur = data.one_sided()[2:]
        if not ur < ul:
            raise ConfigError("a delta-shock needs a compressive jump (u right < u left)")
        return cls(data.density(), data.velocity(), data.f3, jump=data.x0, **kw)

    # -- geometry ----------------------------------------------------------
    def fold(self, t):
        """Hull ``[s_l, s_r]`` of labels whose characteristics have already crossed, or ``None``."""
        mask = self._du < -1.0 / t if t > 0 else np.zeros(self._s.size, dtype=bool)
        if np.any(mask):
            if self.jump is not None:
                raise GeometryError("switch to post-blowup solver: smooth part has folded")
            d = np.diff(np.concatenate([[0], mask.astype(int), [0]]))
            if np.count_nonzero(d == 1) > 1:
                raise GeometryError("more than three characteristic intersections")
            idx = np.nonzero(mask)[0]
            lo, hi = self._s[max(idx[0] - 1, 0)], self._s[min(idx[-1] + 1, self._s.size - 1)]
            fl = lambda v: self.u0.derivative(v, 1) + 1.0 / t
            s_l = float(bisect_vec(fl, np.array([lo]), np.array([self._s[idx[0]]]), tol=1e-14)[0]) \
                if fl(np.array([lo]))[0] > 0 else float(lo)
            s_r = float(bisect_vec(fl, np.array([self._s[idx[-1]]]), np.array([hi]), tol=1e-14)[0]) \
                if fl(np.array([hi]))[0] > 0 else float(hi)
            return s_l, s_r
        if self.jump is not None:
            return self.jump, self.jump
        return None

    def _u_side(self, s, side):
        if self.jump is not None and s == self.jump:
            return self.u0.left_limit(s) if side < 0 else self.u0.right_limit(s)
        return float(self.u0(s))

    def outer_roots(self, t, x, hull=None):
        """Outermost labels ``(S-, S+)`` of the characteristics through ``(t, x)``."""
        hull = self.fold(t) if hull is None else hull
        if hull is None:
            # characteristics have not crossed: a single label reaches x
            g = lambda s: float(self.u0(s)) * t + s - x
            r = brentq(g, -self.L, self.L, xtol=1e-15, rtol=1e-15, maxiter=200)
            return r, r
        s_l, s_r = hull

        def root(a, b, side):
            g = lambda s: self._u_side(s, side) * t + s - x
            ga, gb = g(a), g(b)
            if ga == 0:
                return a
            if gb == 0:
                return b
            if ga * gb > 0:
                end = b if side < 0 else a
                if abs(g(end)) < 1e-12 * max(1.0, abs(x)):
                    return end
                raise GeometryError("singularity left the overlapping domain")
            return brentq(g, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)

        return root(-self.L, s_l, -1), root(s_r, self.L, +1)

    def _integrate(self, a, b, weight):
        if b <= a:
            return np.zeros(2)
        brk = [a] + [c for c in self._breaks if a < c < b] + [b]
        val, _ = integrate(weight, brk, tol=self.quad_tol)
        return np.atleast_1d(val)

    def _weights(self, t):
        def w(s):
            f = self.f0(s)
            u = self.u0(s)
            if self.reading == "literal":
                f = f * np.abs(1 + t * self.u0.derivative(s, 1))
            return np.stack([f, f * u])
        return w

    def segment_atoms(self, t, lo=None, hi=None):
        """Moving atoms ``(x_bar, A, velocity)`` from stretches where ``u0' = -1/t``."""
        if t <= 0:
            return ()
        on = np.abs(self._du + 1.0 / t) < 1e-8
        if lo is not None:
            on &= (self._s >= lo) & (self._s <= hi)
        if np.count_nonzero(on) < 2:
            return ()
        d = np.diff(np.concatenate([[0], on.astype(int), [0]]))
        out = []
        for i0, i1 in zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0] - 1):
            if i1 <= i0:
                continue
            a, b = float(self._s[i0]), float(self._s[i1])
            A, _ = integrate(self.f0, [a, b], tol=1e-12)
            ua = float(self.u0(a))
            out.append((ua * t + a, float(A), ua))
        return tuple(out)

    def cluster(self, t, x):
        """``(m, P, S-, S+)`` for a cluster at ``x`` at time ``t``."""
        s_m, s_p = self.outer_roots(t, x)
        mp = self._integrate(s_m, s_p, self._weights(t))
        m, P = float(mp[0]) + self.f3, float(mp[1])
        if self.reading == "literal":
            for _, A, ua in self.segment_atoms(t, s_m, s_p):
                m += A
                P += A * ua
        return m, P, s_m, s_p

    def velocity(self, t, x, v0):
        m, P, _, _ = self.cluster(t, x)
        if m <= 1e-14:
            return v0
        return P / m

    def state(self, t, x, v0=0.0):
        m, P, s_m, s_p = self.cluster(t, x)
        v = P / m if m > 1e-14 else v0
        ul = self._u_side(s_m, -1)
        ur = self._u_side(s_p, +1)
        return JumpState(t, x, m, v, ur, ul)

    def geometry(self, t, x):
        hull = self.fold(t)
        if hull is None:
            return OverlapGeometry(x, x, ())
        s_l, s_r = hull
        g = lambda s: self.u0(s) * t + s
        x_minus = float(self._u_side(s_r, +1) * t + s_r)
        x_plus = float(self._u_side(s_l, -1) * t + s_l)
        roots = []
        s_m, s_p = self.outer_roots(t, x, hull)
        roots.append(s_m)
        if s_r > s_l and x_minus <= x <= x_plus:
            roots.append(float(bisect_vec(lambda v: g(v) - x, np.array([s_l]), np.array([s_r]), tol=1e-14)[0]))
        roots.append(s_p)
        return OverlapGeometry(x_minus, x_plus, tuple(sorted(roots)), self.segment_atoms(t))

    # -- time stepping ----------------------------------------------------
    def run(self, t0, x0, t_end, dt, v0=0.0):
        """Integrate from ``(t0, x0)`` to ``t_end``; ``v0`` is the velocity while the mass is zero.

        Returns a list of :class:`JumpState`.  Integration stops early with a
        flagged state if the cluster mass vanishes after having been positive.
        """
        if not dt > 0:
            raise ConfigError("dt must be positive")
        states = [self.state(t0, x0, v0)]
        t, x = float(t0), float(x0)
        grown = states[0].m > 1e-14
        while t < t_end - 1e-14:
            h = min(dt, t_end - t)
            for _ in range(self.max_halvings + 1):
                try:
                    k1 = self.velocity(t, x, v0)
                    k2 = self.velocity(t + h / 2, x + h / 2 * k1, v0)
                    k3 = self.velocity(t + h / 2, x + h / 2 * k2, v0)
                    k4 = self.velocity(t + h, x + h * k3, v0)
                    break
                except GeometryError as exc:
                    if "switch" in str(exc) or "more than three" in str(exc):
                        raise
                    h /= 2
            else:
                raise GeometryError("tangency degeneracy: step halved 40 times")
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t + h
            st = self.state(t, x, v0)
            states.append(st)
            if grown and st.m <= 1e-12:
                states[-1] = JumpState(st.t, st.x_j, 0.0, st.v, st.lax_low, st.lax_high, (VANISH,))
                break
            grown = grown or st.m > 1e-14
        return states

    # -- independent x-space quadrature -----------------------------------
    def branch_integrals(self, t, x_j, tol=1e-10):
        """Mass and momentum of the cluster from branch integrals over ``x``.

        Each branch label is found by bisection at every node and weighted
        by ``|ds/dx|`` (jacobian reading) or 1 (literal reading).  Returns
        ``(m, P)`` including ``f3`` and, for the literal reading, segment atoms.
        """
        hull = self.fold(t)
        if hull is None:
            return self.f3, 0.0
        s_l, s_r = hull
        x_minus = self._u_side(s_r, +1) * t + s_r
        x_plus = self._u_side(s_l, -1) * t + s_l
        L = self.L

        def branch(lo, hi):
            def label(xs):
                gf = lambda v: self.u0(v) * t + v - xs
                return bisect_vec(gf, np.full(xs.shape, lo), np.full(xs.shape, hi), tol=1e-15)
            return label

        def weight(label):
            def w(xs):
                s = label(np.asarray(xs, dtype=float))
                f = self.f0(s)
                u = self.u0(s)
                if self.reading == "jacobian":
                    f = f / np.abs(1 + t * self.u0.derivative(s, 1))
                return np.stack([f, f * u])
            return w

        def piece(wf, a, b, at_a, at_b):
            # x = a + (b - a) tau^2 removes an inverse square-root endpoint singularity
            if b <= a:
                return np.zeros(2)
            if at_a and at_b:
                c = 0.5 * (a + b)
                return piece(wf, a, c, True, False) + piece(wf, c, b, False, True)
            if not (at_a or at_b):
                v, _ = integrate(wf, [a, b], tol=tol)
                return np.atleast_1d(v)
            span = b - a

            def sub(tau):
                x = a + span * tau * tau if at_a else b - span * tau * tau
                return wf(x) * (2 * span * tau)

            v, _ = integrate(sub, [0.0, 0.5, 1.0], tol=tol)
            return np.atleast_1d(v)

        total = np.zeros(2)
        right = branch(s_r, L)
        left = branch(-L, s_l)
        smooth_fold = self.jump is None and s_r > s_l
        if self.jump is not None:
            right = branch(s_r + 1e-13, L)
            left = branch(-L, s_l - 1e-13)
        if x_j > x_minus:
            total += piece(weight(right), x_minus, x_j, smooth_fold, False)
        if x_plus > x_j:
            total += piece(weight(left), x_j, x_plus, False, smooth_fold)
        if smooth_fold and x_plus > x_minus:
            total += piece(weight(branch(s_l, s_r)), x_minus, x_plus, True, True)
        m, P = float(total[0]) + self.f3, float(total[1])
        if self.reading == "literal":
            for _, A, ua in self.segment_atoms(t):
                m += A
                P += A * ua
        return m, P


def jump_trajectory_general(data: RiemannData, t_end, dt, **kw):
    """RK4 trajectory from ``(0, x0)`` for Riemann data with function-valued states."""
    solver = StickySolver.from_riemann(data, **kw)
    fl, fr, ul, ur = data.one_sided()
    v0 = _initial_velocity_constant(RiemannData(fl, fr - fl, ul, ur - ul, data.f3,
                                                allow_negative_atom=data.allow_negative_atom))
    return solver.run(0.0, data.x0, t_end, dt, v0)


def post_blowup_evolution(u0: PiecewiseFunction, f0: PiecewiseFunction, t_end, dt, L=20.0, **kw):
    """Cluster trajectory from the first blow-up point of smooth data."""
    from .blowup import analyse

    rep = analyse(u0, f0, span=L)
    if not math.isfinite(rep.t_star):
        raise GeometryError("no blow-up: velocity is non-decreasing")
    solver = StickySolver(f0, u0, 0.0, None, L=L, **kw)
    v0 = float(u0(rep.s_star))
    return solver.run(rep.t_star, rep.x_star, t_end, dt, v0), rep


# ---------------------------------------------------------------------------
# discrete oracle

@dataclass
class OracleResult:
    t: float
    positions: np.ndarray
    masses: np.ndarray
    velocities: np.ndarray
    snapshots: list = field(default_factory=list)

    def heaviest(self):
        i = int(np.argmax(self.masses))
        return float(self.positions[i]), float(self.masses[i]), float(self.velocities[i])


def discretise(f0: PiecewiseFunction, u0: PiecewiseFunction, N, lo, hi, atoms=()):
    """``N`` equal cells on ``[lo, hi]``; each becomes a particle at its midpoint."""
    edges = np.linspace(lo, hi, N + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    ds = (hi - lo) / N
    x = mid
    m = f0(mid) * ds
    v = u0(mid)
    for pos, amp, vel in atoms:
        k = np.searchsorted(x, pos)
        x = np.insert(x, k, pos)
        m = np.insert(m, k, amp)
        v = np.insert(v, k, vel)
    keep = m > 0
    return x[keep], m[keep], v[keep]


def sticky_particle_oracle(x, m, v, t_end, snapshot_times=()):
    """Exact event-driven sticky dynamics of point masses on a line.

    Neighbouring clusters merge on contact, conserving mass and momentum.
    Returns the configuration at ``t_end`` (and at ``snapshot_times``).
    """
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    n = x.size
    # cluster k: reference position at time tref, velocity, mass, momentum
    xr = x[order].tolist()
    tr = [0.0] * n
    vel = np.asarray(v, dtype=float)[order].tolist()
    mass = np.asarray(m, dtype=float)[order].tolist()
    mom = [mi * vi for mi, vi in zip(mass, vel)]
    nxt = list(range(1, n)) + [-1]
    prv = [-1] + list(range(n - 1))
    alive = [True] * n
    ver = [0] * n
    heap = []

    def pos(k, t):
        return xr[k] + vel[k] * (t - tr[k])

    def schedule(k, now):
        j = nxt[k]
        if j < 0:
            return
        dv = vel[k] - vel[j]
        if dv <= 0:
            return
        gap = pos(j, now) - pos(k, now)
        tc = now + max(gap, 0.0) / dv
        heapq.heappush(heap, (tc, k, j, ver[k], ver[j]))

    for k in range(n - 1):
        schedule(k, 0.0)
    snaps = sorted(set(float(s) for s in snapshot_times if 0 <= s < t_end))
    out_snaps = []

    def snapshot(t):
        ks = [k for k in range(n) if alive[k]]
        return (t, np.array([pos(k, t) for k in ks]), np.array([mass[k] for k in ks]),
                np.array([vel[k] for k in ks]))

    while heap and heap[0][0] <= t_end:
        tc, k, j, vk, vj = heapq.heappop(heap)
        while snaps and snaps[0] < tc:
            out_snaps.append(snapshot(snaps.pop(0)))
        if not (alive[k] and alive[j]) or ver[k] != vk or ver[j] != vj:
            continue
        xc = pos(k, tc)
        mass[k] += mass[j]
        mom[k] += mom[j]
        vel[k] = mom[k] / mass[k]
        xr[k], tr[k] = xc, tc
        ver[k] += 1
        alive[j] = False
        nxt[k] = nxt[j]
        if nxt[j] >= 0:
            prv[nxt[j]] = k
        if prv[k] >= 0:
            schedule(prv[k], tc)
        schedule(k, tc)
    for s in snaps:
        out_snaps.append(snapshot(s))
    t, xs, ms, vs = snapshot(t_end)
    return OracleResult(t, xs, ms, vs, out_snaps)


def oracle_for_riemann(data: RiemannData, N, t_end, pad=None):
    """Particle oracle on a window wide enough to feed the cluster until ``t_end``."""
    fl, fr, ul, ur = data.one_sided()
    speed = max(abs(ul), abs(ur)) + abs(ur - ul)
    R = (pad if pad is not None else 1.5 * speed * t_end + 0.25)
    atoms = ((float(data.x0), float(data.f3), 0.0),) if data.f3 > 0 else ()
    x, m, v = discretise(data.density(), data.velocity(), N, data.x0 - R, data.x0 + R, atoms)
    return sticky_particle_oracle(x, m, v, t_end)
