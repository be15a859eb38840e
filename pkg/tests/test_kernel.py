import math

import numpy as np
import pytest

from pressureless import kernel
from pressureless.errors import ConfigError, DomainError
from pressureless.fields import Grid, PiecewiseFunction, RiemannData, preset
from pressureless.kernel import KernelParams, PhaseDensity
from pressureless.riemann import mollified_terms


def test_params_validation():
    with pytest.raises(ConfigError):
        KernelParams(0.0)
    with pytest.raises(ConfigError):
        KernelParams(0.1, L=5.0)
    with pytest.raises(ConfigError):
        KernelParams(0.1, quad_tol=1e-3)


def test_constant_state_is_preserved():
    pd = PhaseDensity(PiecewiseFunction.constant(2.0), PiecewiseFunction.constant(0.7), KernelParams(0.1))
    m = pd.moments(1.0, 0.3)
    assert m.rho == pytest.approx(2.0, rel=1e-9)
    assert m.u_hat == pytest.approx(0.7, abs=1e-10)
    assert m.pressure == pytest.approx(0.0, abs=1e-9)


def test_heat_kernel_of_linear_velocity():
    # u0 = -x/2 on rho = 1: at t the density is 1/(1 - t/2), velocity x u'/(1 + u' t)
    f0 = PiecewiseFunction.constant(1.0)
    u0 = PiecewiseFunction.from_exprs([], ["-x/2"])
    pd = PhaseDensity(f0, u0, KernelParams(0.05, L=20.0))
    m = pd.moments(1.0, 0.4)
    assert m.rho == pytest.approx(2.0, rel=1e-6)
    assert m.u_hat == pytest.approx(-0.4, rel=1e-6)


@pytest.mark.parametrize("u2", [-1.0, 1.0])
def test_quadrature_matches_closed_form(u2):
    data = RiemannData(1.0, 0.5, 0.2, u2)
    eps, sigma = 0.05, 0.02
    pd = PhaseDensity.from_data(data, KernelParams(sigma), eps)
    for x in (-0.9, -0.3, 0.2, 0.5, 1.1):
        q = pd.moments(1.0, x)
        c = mollified_terms(data, eps, sigma, 1.0, x)
        assert q.rho == pytest.approx(c.rho, rel=1e-7, abs=1e-10)
        assert q.u_hat == pytest.approx(c.u_hat, rel=1e-7, abs=1e-10)


def test_integral_term_split_adds_up():
    data = RiemannData(1.0, 1.0, 0.0, -1.0)
    pd = PhaseDensity.from_data(data, KernelParams(0.05), 0.05)
    s = pd.integral_term(1.0, -0.2, u_ref=-0.5)
    assert s.i1 + s.i2 + s.i3 == pytest.approx(s.total)


def test_viscous_residual_small():
    data = preset("tanh")
    r_mass, r_mom = kernel.viscous_residual(data, KernelParams(0.2), 0.5, 0.3, h=1e-3)
    assert abs(r_mass) < 1e-4 and abs(r_mom) < 1e-4


def test_viscous_residual_domain():
    with pytest.raises(DomainError):
        kernel.viscous_residual(preset("tanh"), KernelParams(0.2), 1e-4, 0.0)


def test_schedule():
    sched = kernel.default_schedule(0.1, 3)
    assert sched[-1] == (pytest.approx(0.0125), pytest.approx(0.0125 ** 2))
    kernel.check_schedule(sched)
    with pytest.raises(ConfigError):
        kernel.check_schedule([(0.1, 0.01), (0.2, 0.001)])
    with pytest.raises(ConfigError):
        kernel.check_schedule([(0.1, 0.2)])


def test_initial_pair_needs_epsilon():
    with pytest.raises(ConfigError):
        kernel.initial_pair(RiemannData(1.0, 0.0, 0.0, 1.0))


def test_fp_solution_report_shapes():
    grid = Grid.linspace(1.0, -1.5, 1.5, 7)
    sol, rep = kernel.fp_solution(RiemannData(1.0, 0.0, 0.0, -1.0, f3=0.4), grid, kernel.default_schedule(0.1, 2))
    assert sol.rho.shape == (7,) and rep.cauchy_rho.shape == (7,)
    assert sol.atoms == ((0.0, 0.2), (-1.0, 0.2))
    assert len(rep.history) == 3


def test_l_doubling_converges():
    pd_val = lambda p: PhaseDensity.from_data(preset("tanh"), p).rho(0.5, 0.1)
    val, L = kernel.with_L_doubling(pd_val, KernelParams(0.1, L=10.0))
    assert L >= 20.0 and math.isfinite(float(val))
