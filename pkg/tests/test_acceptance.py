"""The thirteen acceptance criteria, each at its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py -s`` to see one verdict line per
criterion as it finishes; a summary block is printed at the end either way.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from pressureless import blowup, hugoniot, kernel, riemann, sde, sticky
from pressureless.fields import Grid, Piece, PiecewiseFunction, RiemannData, preset
from pressureless.flux import (FLUX_PRESETS, back_transform, law_residual, preset_flux,
                               transform_problem, transformed_solution)
from pressureless.quadrature import integrate

RAREFACTION_SETS = [(1.0, 0.0, 0.0, 1.0), (1.0, 1.0, -0.5, 1.0), (2.0, -1.0, 0.3, 0.8), (0.5, 1.5, -1.0, 2.0)]
COMPRESSION_SETS = [(1.0, 0.0, 0.0, -1.0), (1.0, 1.0, 0.0, -1.0), (2.0, -0.5, 0.3, -0.7), (1.0, 2.0, 0.5, -1.5)]
TEST_FUNCTIONS = {"x": lambda x: x, "cos": np.cos, "exp": lambda x: np.exp(0.5 * x)}


def test_criterion_01_riemann_closed_forms(criterion):
    start = time.perf_counter()
    grid = Grid.linspace(1.0, -2.0, 2.0, 51)
    worst_rho = worst_u = 0.0
    for params in RAREFACTION_SETS + COMPRESSION_SETS:
        data = RiemannData(*params)
        schedule = kernel.default_schedule()
        eps = schedule[-1][0]
        assert eps == pytest.approx(1.5625e-3) and schedule[-1][1] == pytest.approx(eps ** 2)
        sol, _ = kernel.fp_solution(data, grid, schedule)
        exact = riemann.riemann_fp(data, grid.t)
        keep = np.ones(grid.xs.size, dtype=bool)
        for b in exact.breakpoints:
            keep &= np.abs(grid.xs - b) > 2 * eps
        worst_rho = max(worst_rho, float(np.max(np.abs(sol.rho - exact.rho(grid.xs))[keep])))
        worst_u = max(worst_u, float(np.max(np.abs(sol.u - exact.u(grid.xs))[keep])))
    elapsed = time.perf_counter() - start
    ok = worst_rho < 5e-2 and worst_u < 5e-2 and elapsed < 60
    criterion(1, ok, f"max|drho|={worst_rho:.2e} max|du|={worst_u:.2e} time={elapsed:.1f}s")
    assert ok


def test_criterion_02_singular_riemann(criterion):
    start = time.perf_counter()
    eps = sigma = 1e-4
    t = 1.0
    worst = 0.0
    for u2 in (-1.0, 1.0):
        data = RiemannData(1.0, 0.5, 0.2, u2, 2.0)
        xl, xr = data.u1 * t, (data.u1 + data.u2) * t
        lo, hi = min(xl, xr), max(xl, xr)
        brk = np.unique(np.concatenate([np.linspace(lo - 0.2, hi + 0.2, 41),
                                        xl + np.linspace(-0.1, 0.1, 81), xr + np.linspace(-0.1, 0.1, 81)]))

        def f(xs):
            sing = np.array([riemann.mollified_terms(data, eps, sigma, t, x).rho_sing for x in xs])
            return np.vstack([sing * phi(xs) for phi in TEST_FUNCTIONS.values()])

        vals, _ = integrate(f, brk, tol=1e-9)
        for val, phi in zip(vals, TEST_FUNCTIONS.values()):
            target = 0.5 * data.f3 * (phi(xl) + phi(xr))
            worst = max(worst, abs(val - target) / abs(target))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-2 and elapsed < 30
    criterion(2, ok, f"max relative error={worst:.2e} time={elapsed:.1f}s")
    assert ok


def test_criterion_03_blowup_exponent(criterion):
    start = time.perf_counter()
    data = preset("tanh")
    sigmas = 10.0 ** -np.arange(1.0, 3.01, 0.5)
    fit = blowup.scaling_exponent(data.u0, data.f0, sigmas)
    d1 = abs(float(data.u0.derivative(0.0, 1)))
    d3 = abs(float(data.u0.derivative(0.0, 3)))
    expected = blowup.km_constant(3) * d1 ** (1 / 3) / d3 ** (1 / 3) * float(data.f0(0.0))
    rel = abs(fit.prefactor / expected - 1)
    elapsed = time.perf_counter() - start
    ok = abs(fit.slope + 2 / 3) <= 0.03 and rel < 0.05 and elapsed < 120
    criterion(3, ok, f"slope={fit.slope:.4f} prefactor={fit.prefactor:.5f} vs {expected:.5f} "
                     f"time={elapsed:.1f}s")
    assert ok


def test_criterion_04_km_gamma_vs_quadrature(criterion):
    start = time.perf_counter()
    diffs = [abs(blowup.km_constant(m) - blowup.km_constant_by_quadrature(m)) for m in (2, 3, 4)]
    elapsed = time.perf_counter() - start
    ok = max(diffs) < 1e-8 and elapsed < 5
    criterion("4b", ok, f"max |Gamma - quadrature| = {max(diffs):.1e} time={elapsed:.2f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="K_m/m tends to sqrt(2)/(e sqrt(pi)), not sqrt(2)/e; see decisions ledger")
def test_criterion_04_km_asymptote(criterion):
    ratio = blowup.km_constant(50) / 50
    target = math.sqrt(2) / math.e
    ok = abs(ratio - target) < 0.15
    criterion("4a", ok, f"K50/50={ratio:.5f} vs sqrt(2)/e={target:.5f} (gap {abs(ratio - target):.3f})")
    assert ok


def test_criterion_05_delta_amplitude(criterion):
    start = time.perf_counter()
    data = preset("linear-plateau")
    rep = blowup.analyse(data.u0, data.f0)
    delta = 0.02
    pd = kernel.PhaseDensity(data.f0, data.u0, kernel.KernelParams(1e-3, 12.0))
    phi = blowup.bump(delta, rep.x_star)
    val = blowup.pair_density(pd, rep.t_star, phi, -delta, delta, [-0.01, -0.003, 0.0, 0.003, 0.01])
    phi0 = float(phi(0.0))
    elapsed = time.perf_counter() - start
    ok = rep.A == pytest.approx(2.0) and abs(val - 2 * phi0) < 5e-2 * phi0 and elapsed < 30
    criterion(5, ok, f"A={rep.A:.6f} pairing={val:.5f} target={2 * phi0:.5f} time={elapsed:.1f}s")
    assert ok


def _term_pairing(data, eps, sigma, t):
    pd = kernel.PhaseDensity.from_data(data, kernel.KernelParams(sigma, 10.0), eps)
    xl, xr = data.u1 * t, (data.u1 + data.u2) * t
    lo, hi = min(xl, xr), max(xl, xr)
    brk = np.unique(np.concatenate([np.linspace(lo - 0.1, hi + 0.1, 7),
                                    xl + eps * np.linspace(-3, 3, 13), xr + eps * np.linspace(-3, 3, 13)]))

    def f(xs):
        term = np.array([pd.integral_term(t, x).total for x in xs])
        return np.vstack([term * phi(xs) for phi in TEST_FUNCTIONS.values()])

    vals, _ = integrate(f, brk, tol=1e-5)
    return vals, xl, xr


def test_criterion_06_spurious_pressure(criterion):
    data = RiemannData(1.0, 1.0, 0.0, -1.0)
    f1, f2, u2 = (Fraction(v) for v in (data.f1, data.f2, data.u2))
    # two cold streams: densities f1 (velocity u1) and f1 + f2 (velocity u1 + u2)
    rho = 2 * f1 + f2
    mean = (f1 * 0 + (f1 + f2) * u2) / rho
    plug_in = (f1 * mean ** 2 + (f1 + f2) * (u2 - mean) ** 2)
    exact_ok = plug_in == hugoniot.pressure_level(data) == f1 * (f1 + f2) * u2 ** 2 / (2 * f1 + f2)

    t, sigma, eps = 1.0, 1e-3, 5e-3
    vals, xl, xr = _term_pairing(data, eps, sigma, t)
    p0 = float(hugoniot.pressure_level(data))
    # <d_x p, phi> = -<p, phi'> = p0 (phi(xr) - phi(xl)) with the overlap (xr, xl)
    targets = [p0 * (phi(xr) - phi(xl)) for phi in TEST_FUNCTIONS.values()]
    err = max(abs(v - g) for v, g in zip(vals, targets))

    control, _, _ = _term_pairing(RiemannData(1.0, 0.0, 0.0, 1.0), eps, sigma, t)
    ctl = float(np.max(np.abs(control)))
    ok = exact_ok and err < 5e-2 and ctl < 1e-2
    criterion(6, ok, f"plug-in={plug_in} exact={exact_ok} pairing error={err:.2e} control={ctl:.1e}")
    assert ok


def test_criterion_07_hugoniot_audit(criterion):
    ok = True
    for params in COMPRESSION_SETS + [(1.0, 0.5, 0.2, -1.0, 2.0)]:
        data = RiemannData(*params)
        with_p = hugoniot.audit_fp(data, 1)
        without = hugoniot.audit_fp(data, 1, with_pressure=False)
        ok &= all(a.rh_mass_residual == 0 for a in with_p)
        ok &= all(a.rh_momentum_residual != 0 for a in without)
        ok &= all(a.rh_momentum_residual == 0 for a in with_p)
        audit, info = hugoniot.audit_sticky(data, Fraction(1, 2))
        ok &= audit.rh_mass_residual == 0 and audit.rh_momentum_residual == 0
        ok &= info["mass"] == 0 and info["momentum"] == 0 and info["mass_law"] == 0
    criterion(7, ok, "FP: mass exact, momentum fails at p=0 and holds with the dispersion pressure; "
                     "sticky: both hold symbolically")
    assert ok


STICKY_SETS = [(1.0, 1.0, 0.0, -1.0), (1.0, 0.0, 0.0, -1.0), (1.0, 0.5, 0.2, -1.0, 0.5), (2.0, -0.5, 0.5, -1.5, 1.0)]


def test_criterion_08_sticky_trajectory(criterion):
    start = time.perf_counter()
    worst_dx = worst_dm = worst_id = 0.0
    lax = True
    for params in STICKY_SETS:
        data = RiemannData(*params)
        st = sticky.jump_trajectory_constant(data, 1.0)
        orc = sticky.oracle_for_riemann(data, 10_000, 1.0)
        xo, mo, _ = orc.heaviest()
        worst_dx = max(worst_dx, abs(st.x_j - xo))
        worst_dm = max(worst_dm, abs(st.m - mo) / st.m)
        jf, juf, ju2f = sticky.jumps(data)
        for t in np.linspace(0.05, 1.0, 20):
            s = sticky.jump_trajectory_constant(data, t)
            lax &= s.lax_low < s.v < s.lax_high
            mass_law = -juf * t + jf * (s.x_j - data.x0) + data.f3
            quad = data.f3 ** 2 - 2 * juf * data.f3 * t + (juf ** 2 - jf * ju2f) * t ** 2
            worst_id = max(worst_id, abs(mass_law ** 2 - quad))
    rem8 = RiemannData(2.0, -1.8, -1.0, -2.0, 1.0)
    late = sticky.jump_trajectory_constant(rem8, 5.0)
    vanish = sticky.VANISH in late.flags
    elapsed = time.perf_counter() - start
    ok = worst_dx < 0.02 and worst_dm < 0.02 and lax and worst_id < 1e-10 and vanish and elapsed < 60
    criterion(8, ok, f"|dx|={worst_dx:.1e} |dm|/m={worst_dm:.1e} lax={lax} identity={worst_id:.1e} "
                     f"vanishing flagged={vanish} at t={late.t:.4f} time={elapsed:.1f}s")
    assert ok


def test_criterion_09_general_and_post_blowup(criterion):
    start = time.perf_counter()
    data = RiemannData(1.0, 0.5, 0.2, -1.0, 0.5)
    states = sticky.jump_trajectory_general(data, 1.0, 1e-2)
    gap = 0.0
    for s in states[1:]:
        ref = sticky.jump_trajectory_constant(data, s.t)
        gap = max(gap, abs(s.x_j - ref.x_j), abs(s.m - ref.m))
    tanh = preset("tanh")
    post, _ = sticky.post_blowup_evolution(tanh.u0, tanh.f0, 2.0, 1e-2)
    drift = max(abs(s.x_j) for s in post)
    s_bar = brentq(lambda s: 2 * math.tanh(s) - s, 1.0, 3.0)
    x, m, v = sticky.discretise(tanh.f0, tanh.u0, 20_000, -3.0, 3.0)
    _, m_oracle, _ = sticky.sticky_particle_oracle(x, m, v, 2.0).heaviest()
    m2 = post[-1].m
    elapsed = time.perf_counter() - start
    ok = (gap < 1e-6 and drift < 1e-6 and abs(m2 - 2 * s_bar) < 1e-3 and abs(m2 - m_oracle) < 1e-3
          and elapsed < 120)
    criterion(9, ok, f"general vs closed={gap:.1e} |x_j|max={drift:.1e} m(2)={m2:.6f} 2s={2 * s_bar:.6f} "
                     f"oracle={m_oracle:.6f} time={elapsed:.1f}s")
    assert ok


def test_criterion_10_entropy(criterion):
    t = 1.0
    passes = []
    for params in RAREFACTION_SETS + COMPRESSION_SETS:
        data = RiemannData(*params)
        sol = riemann.riemann_fp(data, t)
        for a in hugoniot.audit_fp(data, 1):
            passes.append(hugoniot.entropy_audit(sol.u, t, float(a.position))[0])
        if data.u2 < 0:
            st = sticky.jump_trajectory_constant(data, t)
            vel = PiecewiseFunction.step(data.u1, data.u1 + data.u2, st.x_j)
            passes.append(hugoniot.entropy_audit(vel, t, st.x_j)[0])
    fails = []
    for params in RAREFACTION_SETS:
        data = RiemannData(*params)
        swapped = riemann.order_swapped_velocity(data, t)
        fails.append(not hugoniot.entropy_audit(swapped, t, data.x0 + (data.u1 + data.u2 / 2) * t)[0])
    ok = all(passes) and all(fails)
    criterion(10, ok, f"{sum(passes)}/{len(passes)} constructed jumps pass, "
                      f"{sum(fails)}/{len(fails)} order-swapped jumps fail")
    assert ok


def test_criterion_11_sde_oracle(criterion):
    start = time.perf_counter()
    data = RiemannData(1.0, 1.0, 0.0, -1.0)
    f0, u0 = data.mollified(1e-3)
    sigma, t = 0.05, 1.0
    cfg = sde.McConfig(100_000, 1e-3, sigma, seed=2024)
    ens = sde.simulate(f0, u0, cfg, t)
    grid = Grid.linspace(t, -2.5, 1.5, 81)
    est = sde.estimate_fields(ens, grid, bandwidth=sigma * math.sqrt(t) / 3)
    frac = sde.compare_with_quadrature(est, ens, f0, u0).fraction_within(3.0)
    a = sde.simulate(f0, u0, sde.McConfig(1000, 1e-2, sigma, seed=5), t)
    b = sde.simulate(f0, u0, sde.McConfig(1000, 1e-3, sigma, seed=5), t)
    bitwise = np.array_equal(a.x[:100], b.x[:100])
    elapsed = time.perf_counter() - start
    ok = frac >= 0.95 and bitwise and elapsed < 60
    criterion(11, ok, f"within 3 s.e. at {frac:.1%} of unflagged points, dt-bitwise={bitwise} "
                      f"time={elapsed:.1f}s")
    assert ok


def test_criterion_12_mollifier_independence(criterion):
    grid = Grid.linspace(1.0, -2.0, 2.0, 51)
    worst = 0.0
    for params in [(1.0, 1.0, 0.0, -1.0), (1.0, 1.0, -0.5, 1.0)]:
        data = RiemannData(*params)
        exact = riemann.riemann_fp(data, grid.t)
        d_rho, d_u = kernel.prop4_independence(data, grid, exclude=exact.breakpoints)
        worst = max(worst, d_rho, d_u)
    ok = worst < 5e-2
    criterion(12, ok, f"linear vs smoothstep bridges differ by {worst:.2e}")
    assert ok


def test_criterion_13_flux_transform(criterion):
    samples = {"identity": np.linspace(-5, 5, 100), "square-positive": np.linspace(0.05, 5, 100),
               "exp": np.linspace(-5, 5, 100)}
    roundtrip = 0.0
    residual = 0.0
    v0 = PiecewiseFunction([], [Piece.from_expr("1.5 + 0.5*tanh(x)")])
    xs = np.linspace(-3, 3, 100)
    for name in FLUX_PRESETS:
        flux = preset_flux(name)
        roundtrip = max(roundtrip, float(np.max(np.abs(flux.G_inverse(flux.G(samples[name])) - samples[name]))))
        prob = transform_problem(v0, 1.0, flux)
        roundtrip = max(roundtrip, float(np.max(np.abs(back_transform(prob.u0, flux)(xs) - v0(xs)))))
        sol = lambda tt, xx: transformed_solution(prob, tt, xx)[1]
        for x in np.linspace(-2, 2, 9):
            residual = max(residual, abs(law_residual(sol, flux, 0.3, x)))
    ok = roundtrip < 1e-10 and residual < 1e-4
    criterion(13, ok, f"round trip={roundtrip:.1e} law residual={residual:.1e}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
