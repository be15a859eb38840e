import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pressureless.errors import ConfigError
from pressureless.fields import (Grid, LineMeasure, Piece, PiecewiseFunction, RiemannData,
                                 approximate_atom, load_table, mollify, preset)


def test_piece_from_expr_derivatives():
    p = Piece.from_expr("-tanh(x)")
    assert float(p.derivative(0.0, 1)) == pytest.approx(-1.0)
    assert float(p.derivative(0.0, 3)) == pytest.approx(2.0)


def test_step_limits_and_jumps():
    f = PiecewiseFunction.step(1.0, 3.0, at=0.5)
    assert f.left_limit(0.5) == 1.0 and f.right_limit(0.5) == 3.0
    assert not f.is_continuous()
    np.testing.assert_allclose(f(np.array([0.0, 1.0])), [1.0, 3.0])


def test_arithmetic():
    f = PiecewiseFunction.step(1.0, 2.0) + PiecewiseFunction.constant(1.0)
    np.testing.assert_allclose(f(np.array([-1.0, 1.0])), [2.0, 3.0])
    np.testing.assert_allclose((f - f)(np.array([-1.0, 1.0])), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-3, 0.5), st.sampled_from(["linear", "smoothstep"]))
def test_mollify_is_monotone_and_local(left, right, eps, shape):
    f = mollify(PiecewiseFunction.step(left, right), eps, shape)
    xs = np.linspace(-1, 1, 401)
    vals = f(xs)
    assert f.is_continuous(tol=1e-9)
    d = np.diff(vals) * np.sign(right - left)
    assert np.all(d >= -1e-12)
    far = np.abs(xs) > eps
    np.testing.assert_allclose(vals[far], np.where(xs[far] < 0, left, right), atol=1e-12)


def test_approximate_atom_mass():
    from pressureless.quadrature import integrate
    g = approximate_atom(2.5, 0.3, 1e-2)
    val, _ = integrate(g, [-1.0, 0.25, 0.35, 1.0])
    assert val == pytest.approx(2.5, rel=1e-8)


def test_line_measure_counts_atoms():
    m = LineMeasure(PiecewiseFunction.constant(1.0), ((0.0, 2.0), (0.0, 1.0)))
    assert m.atoms == ((0.0, 3.0),)
    assert m.mass(-1.0, 1.0) == pytest.approx(5.0)
    with pytest.raises(ConfigError):
        LineMeasure(PiecewiseFunction.constant(1.0), ((0.0, -1.0),))


def test_riemann_data_validation():
    with pytest.raises(ConfigError):
        RiemannData(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        RiemannData(1.0, -1.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        RiemannData(1.0, 0.0, 0.0, -1.0, f3=-0.5)
    d = RiemannData(1.0, 0.0, 0.0, -1.0, f3=-0.5, allow_negative_atom=True)
    assert d.measure().atoms == ((0.0, -0.5),)


def test_one_sided_states():
    d = RiemannData(1.0, 0.5, 0.2, -1.0, x0=0.3)
    assert d.one_sided() == (1.0, 1.5, 0.2, pytest.approx(-0.8))


def test_grid_validation():
    with pytest.raises(ConfigError):
        Grid(1.0, np.array([0.0, 0.0]))
    with pytest.raises(ConfigError):
        Grid(-1.0, np.array([0.0, 1.0]))
    assert Grid.linspace(1.0, -1, 1, 5).xs.size == 5


@pytest.mark.parametrize("name", ["tanh", "arctan", "cubic", "linear-plateau", "heaviside-riemann"])
def test_presets_build(name):
    assert preset(name) is not None


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("nope")


def test_load_table(tmp_path):
    p = tmp_path / "init.csv"
    p.write_text("x,f,u\n-1,1,1\n0,2,0\n1,1,-1\n")
    data = load_table(p)
    assert float(data.f0(0.5)) == pytest.approx(1.5)
    assert float(data.u0(-0.5)) == pytest.approx(0.5)
    p.write_text("x,f,u\n-1,-1,1\n1,1,0\n")
    with pytest.raises(ConfigError):
        load_table(p)
