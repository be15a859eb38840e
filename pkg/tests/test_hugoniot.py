from fractions import Fraction

import numpy as np
import pytest

from pressureless import hugoniot
from pressureless.errors import ConfigError
from pressureless.fields import PiecewiseFunction, RiemannData
from pressureless.riemann import order_swapped_velocity, riemann_fp


def test_pressure_level_exact():
    assert hugoniot.pressure_level(RiemannData(1.0, 1.0, 0.0, -1.0)) == Fraction(2, 3)
    assert hugoniot.pressure_level(RiemannData(1.0, 1.0, 0.0, 1.0)) == 0


def test_spurious_pressure_profile():
    data = RiemannData(1.0, 1.0, 0.0, -1.0)
    p = hugoniot.spurious_pressure(data, 1.0, np.array([-2.0, -1.0, -0.5, 0.0, 0.5]))
    np.testing.assert_allclose(p, [0.0, 1 / 3, 2 / 3, 1 / 3, 0.0])


def test_fp_compression_needs_pressure():
    data = RiemannData(2.0, -0.5, 0.3, -0.7)
    assert all(a.passes for a in hugoniot.audit_fp(data, 1))
    bare = hugoniot.audit_fp(data, 1, with_pressure=False)
    assert all(a.rh_mass_residual == 0 for a in bare)
    assert not any(a.passes for a in bare)


def test_fp_rarefaction_edges_pass_without_pressure():
    assert all(a.passes for a in hugoniot.audit_fp(RiemannData(1.0, 1.0, -0.5, 1.0), 1, with_pressure=False))


def test_positions_are_exact():
    audits = hugoniot.audit_fp(RiemannData(1.0, 1.0, 0.25, -1.0, x0=0.5), Fraction(1, 2))
    assert [a.position for a in audits] == [Fraction(1, 8), Fraction(5, 8)]


def test_sticky_symbolic():
    audit, info = hugoniot.audit_sticky(RiemannData(1.0, 0.5, 0.2, -1.0, 2.0), Fraction(1, 3))
    assert audit.passes
    assert info["mass"] == 0 and info["momentum"] == 0


def test_sticky_equal_density():
    audit, _ = hugoniot.audit_sticky(RiemannData(1.0, 0.0, 1.0, -2.0), 1)
    assert audit.passes and audit.position == 0 and audit.speed == 0


def test_entropy_check():
    ok, margin = hugoniot.entropy_check(lambda x: x, 1.0, 0.0, 1.0)
    assert ok and margin == pytest.approx(0.0)
    ok, _ = hugoniot.entropy_check(lambda x: 2 * x, 1.0, 0.0, 1.0)
    assert not ok
    with pytest.raises(ConfigError):
        hugoniot.entropy_check(lambda x: x, 0.0, 0.0, 1.0)


def test_entropy_rarefaction_fan_passes_swap_fails():
    data = RiemannData(1.0, 0.0, 0.0, 1.0)
    fan = riemann_fp(data, 1.0)
    assert hugoniot.entropy_audit(fan.u, 1.0, 0.0)[0]
    assert hugoniot.entropy_audit(fan.u, 1.0, 0.5)[0]
    assert not hugoniot.entropy_audit(order_swapped_velocity(data, 1.0), 1.0, 0.5)[0]


def test_downward_jump_always_passes():
    step = PiecewiseFunction.step(1.0, -1.0)
    ok, margin = hugoniot.entropy_audit(step, 1.0, 0.0)
    assert ok and margin >= 1.0
