"""Monte Carlo oracle for the stochastically perturbed free-particle system.

Particles start at ``X0 ~ f0`` (normalised on ``[-L, L]``) with velocity
``u0(X0)``; the velocity never changes, so the position at time ``t`` is
``X0 + U0 t + sigma sqrt(t) Z`` in one exact step.

Random numbers come from Philox in fixed blocks of paths, one key per seed and
one stream offset per block, so path ``i`` always receives the same draws
regardless of how many paths are requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, DomainError
from .fields import PiecewiseFunction
from .kernel import KernelParams, PhaseDensity, initial_pair
from .quadrature import bisect_vec, integrate

BLOCK = 4096
MAX_PATHS = 10_000_000   # n_paths * steps stays below 1e10 with the dt invariant
N_BATCHES = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt: float
    sigma: float
    seed: int = 0
    bandwidth: float | None = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1000:
            raise ConfigError("n_paths must be an integer >= 1000")
        if self.n_paths > MAX_PATHS:
            raise ConfigError(f"n_paths above the budget of {MAX_PATHS}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.sigma >= 0:
            raise ConfigError("sigma must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError("bandwidth must be positive")


@dataclass
class Ensemble:
    t: float
    x0: np.ndarray
    u: np.ndarray
    x: np.ndarray
    mass: float
    L: float
    config: McConfig

    @property
    def n(self):
        return self.x.size


def uniforms(seed, n, width=2):
    """``(n, width)`` uniforms in (0, 1); row ``i`` depends only on ``seed`` and ``i``."""
    nblocks = -(-n // BLOCK)
    base = np.random.Philox(key=int(seed))
    out = np.empty((nblocks * BLOCK, width))
    for b in range(nblocks):
        g = np.random.Generator(base.jumped(b))
        out[b * BLOCK:(b + 1) * BLOCK] = g.random((BLOCK, width))
    out = out[:n]
    # random() can return exactly 0
    return np.clip(out, 2.0 ** -60, 1 - 2.0 ** -53)


class _InverseCDF:
    def __init__(self, f0: PiecewiseFunction, L, step=1e-2):
        cuts = sorted({-L, L, *(b for b in f0.breakpoints if -L < b < L)})
        edges = []
        for a, b in zip(cuts, cuts[1:]):
            n = max(1, int(math.ceil((b - a) / step)))
            edges.extend(np.linspace(a, b, n + 1)[:-1].tolist())
        edges.append(L)
        self.edges = np.asarray(edges)
        self.f0 = f0
        cell = self._partial(self.edges[:-1], self.edges[1:])
        if np.any(cell < -1e-14):
            raise DomainError("initial density must be non-negative")
        self.cum = np.concatenate([[0.0], np.cumsum(np.maximum(cell, 0.0))])
        self.mass = float(self.cum[-1])
        if not self.mass > 0:
            raise DomainError("initial density vanishes on [-L, L]")

    def _partial(self, a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        vals = np.asarray(self.f0(nodes.ravel())).reshape(nodes.shape)
        return half * (vals @ _GL_W)

    def __call__(self, q):
        target = q * self.mass
        k = np.searchsorted(self.cum, target, side="right") - 1
        k = np.clip(k, 0, self.edges.size - 2)
        a, b = self.edges[k], self.edges[k + 1]
        rest = target - self.cum[k]
        return bisect_vec(lambda x: self._partial(a, x) - rest, a, b, tol=1e-10)


def simulate(f0, u0, cfg: McConfig, t_end, L=10.0, epsilon=None) -> Ensemble:
    """Terminal positions and velocities of ``cfg.n_paths`` particles at ``t_end``.

    ``f0`` may also be Riemann or smooth data (then ``u0`` is ignored when
    None and ``epsilon`` mollifies Riemann data).
    """
    if u0 is None:
        f0, u0 = initial_pair(f0, epsilon)
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    if cfg.dt > 1e-2 * t_end:
        raise ConfigError("dt must not exceed 1e-2 * t_end")
    inv = _InverseCDF(f0, L)
    q = uniforms(cfg.seed, cfg.n_paths)
    x0 = inv(q[:, 0])
    u = np.asarray(u0(x0), dtype=float)
    z = ndtri(q[:, 1])
    # exact: dU = 0, so dt plays no role in the update
    x = x0 + u * t_end + cfg.sigma * math.sqrt(t_end) * z
    return Ensemble(float(t_end), x0, u, x, inv.mass, float(L), cfg)


def silverman(x):
    x = np.asarray(x, dtype=float)
    sd = np.std(x, ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** -0.2


@dataclass
class FieldEstimate:
    xs: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    stderr_rho: np.ndarray
    stderr_u: np.ndarray
    flagged: np.ndarray
    bandwidth: float
    mass: float

    @property
    def rho_unnormalised(self):
        return self.rho * self.mass


def _kernel_sums(x, u, xs, h, chunk=2048, squares=False):
    s0 = np.zeros(xs.size)
    s1 = np.zeros(xs.size)
    s2 = np.zeros(xs.size)
    norm = 1.0 / (h * math.sqrt(2 * math.pi))
    for i in range(0, x.size, chunk):
        d = (xs[:, None] - x[None, i:i + chunk]) / h
        k = np.exp(-0.5 * d * d) * norm
        s0 += k.sum(axis=1)
        s1 += k @ u[i:i + chunk]
        if squares:
            s2 += (k * k).sum(axis=1)
    return (s0, s1, s2) if squares else (s0, s1)


def estimate_fields(ensemble: Ensemble, grid, bandwidth=None) -> FieldEstimate:
    """Gaussian KDE of the positions and Nadaraya-Watson velocity on ``grid``.

    ``rho`` integrates to one; ``rho_unnormalised`` restores the mass of
    ``f0`` on ``[-L, L]``.  Standard errors come from 16 batch means; points
    with fewer than 10 expected samples per bandwidth are flagged.  The
    velocity error is floored at ``range(U) / n_eff`` (Kish effective count).
    """
    if ensemble.n == 0:
        raise ConfigError("empty ensemble")
    xs = np.asarray(grid.xs if hasattr(grid, "xs") else grid, dtype=float)
    h = bandwidth or ensemble.config.bandwidth or silverman(ensemble.x)
    n = ensemble.n
    s0, s1, s2 = _kernel_sums(ensemble.x, ensemble.u, xs, h, squares=True)
    rho = s0 / n
    with np.errstate(invalid="ignore", divide="ignore"):
        u = s1 / s0
    nb = N_BATCHES
    size = n // nb
    br = np.empty((nb, xs.size))
    bu = np.empty((nb, xs.size))
    for b in range(nb):
        sl = slice(b * size, (b + 1) * size)
        c0, c1 = _kernel_sums(ensemble.x[sl], ensemble.u[sl], xs, h)
        br[b] = c0 / size
        with np.errstate(invalid="ignore", divide="ignore"):
            bu[b] = c1 / c0
    se_r = br.std(axis=0, ddof=1) / math.sqrt(nb)
    se_u = bu.std(axis=0, ddof=1) / math.sqrt(nb)
    # A velocity class never seen near x still moves the estimate by up to
    # range / n_eff, which batch spread cannot detect.
    with np.errstate(invalid="ignore", divide="ignore"):
        n_eff = s0 * s0 / s2
    spread = float(np.ptp(ensemble.u))
    se_u = np.fmax(se_u, spread / n_eff)
    flagged = (rho * h * n < 10) | ~np.isfinite(se_u) | ~np.isfinite(u)
    return FieldEstimate(xs, rho, u, se_r, se_u, flagged, float(h), ensemble.mass)


def effective_sigma(sigma, t, h):
    """Kernel smoothing adds ``h^2`` to the position variance ``sigma^2 t``."""
    return math.sqrt(sigma * sigma + h * h / t)


@dataclass
class Comparison:
    xs: np.ndarray
    rho_ref: np.ndarray
    u_ref: np.ndarray
    d_rho: np.ndarray
    d_u: np.ndarray
    se_rho: np.ndarray
    se_u: np.ndarray
    used: np.ndarray

    def agree(self, k=3.0, atol=1e-9):
        """Within ``k`` standard errors; ``atol`` covers batches with zero spread
        (every nearby particle carrying the same velocity)."""
        return ((np.abs(self.d_rho) <= k * self.se_rho + atol)
                & (np.abs(self.d_u) <= k * self.se_u + atol))

    def fraction_within(self, k=3.0, atol=1e-9):
        ok = self.agree(k, atol)
        return float(np.mean(ok[self.used])) if np.any(self.used) else math.nan


def compare_with_quadrature(est: FieldEstimate, ensemble: Ensemble, f0, u0, quad_tol=1e-9):
    """Differences between the estimates and the kernel fields at the effective sigma."""
    s_eff = effective_sigma(ensemble.config.sigma, ensemble.t, est.bandwidth)
    pd = PhaseDensity(f0, u0, KernelParams(s_eff, L=ensemble.L, quad_tol=quad_tol))
    ms = [pd.moments(ensemble.t, xv) for xv in est.xs]
    rho_ref = np.array([m.rho for m in ms])
    u_ref = np.array([m.u_hat for m in ms])
    d_r = est.rho_unnormalised - rho_ref
    d_u = est.u - u_ref
    used = ~est.flagged & np.isfinite(d_r) & np.isfinite(d_u)
    return Comparison(est.xs, rho_ref, u_ref, d_r, d_u, est.stderr_rho * est.mass, est.stderr_u, used)
