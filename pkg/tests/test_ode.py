import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import maniplab as ml
from maniplab.coeffs import model1_D_closed, model1_riccati_table

from conftest import make_params


def _const_system(c):
    return ml.OdeSystem(dimension=1, rhs=lambda t, y: np.zeros(1),
                        terminal=np.array([c]), names=("y",))


def test_constant_system():
    grid = ml.TimeGrid(T=2.0, n_steps=16)
    table = ml.integrate_backward(_const_system(3.5), grid)
    assert np.all(table.values == 3.5)


def test_linear_system_exact():
    # y' = -1, y(T) = 0 on T = 1 gives y(t) = 1 - t, exact under RK4
    grid = ml.TimeGrid(T=1.0, n_steps=10)
    sys_ = ml.OdeSystem(dimension=1, rhs=lambda t, y: np.array([-1.0]),
                        terminal=np.zeros(1), names=("y",))
    table = ml.integrate_backward(sys_, grid)
    assert table.col("y") == pytest.approx(1.0 - grid.points, abs=1e-14)


def test_terminal_row_exact():
    grid = ml.TimeGrid(T=1.0, n_steps=7)
    term = np.array([1.25, -3.5])
    sys_ = ml.OdeSystem(dimension=2, rhs=lambda t, y: -y, terminal=term)
    table = ml.integrate_backward(sys_, grid)
    assert np.array_equal(table.values[-1], term)


def test_deterministic_bit_identical():
    p = make_params(1, lam=1.0)
    grid = ml.TimeGrid(T=1.0, n_steps=500)
    t1 = ml.model1_coeffs(p, grid).table
    t2 = ml.model1_coeffs(p, grid).table
    assert np.array_equal(t1.values, t2.values)


def test_divergence_reported():
    # y' = -y^2 backward from y(T) = 10 has a pole at T - t = 1/10
    grid = ml.TimeGrid(T=1.0, n_steps=1000)
    sys_ = ml.OdeSystem(dimension=1, rhs=lambda t, y: -y * y,
                        terminal=np.array([10.0]))
    with pytest.raises(ml.DivergenceError, match="blow-up"):
        ml.integrate_backward(sys_, grid)


def test_divergence_cap_configurable():
    grid = ml.TimeGrid(T=1.0, n_steps=100)
    sys_ = ml.OdeSystem(dimension=1, rhs=lambda t, y: -y,
                        terminal=np.array([2.0]))
    # growing backward as e^(T-t): caps out with a tiny threshold
    with pytest.raises(ml.DivergenceError):
        ml.integrate_backward(sys_, grid, divergence_cap=2.5)


def test_riccati_vs_closed_form_tolerance():
    p = make_params(1, lam=1.0)
    grid = ml.TimeGrid(T=1.0, n_steps=10_000)
    d_rk4 = model1_riccati_table(p, grid)
    d_closed = model1_D_closed(p, grid.points)
    assert np.max(np.abs(d_rk4 - d_closed)) <= 1e-8


def test_fourth_order_convergence():
    # halving h must shrink the error against the closed form by >= 8x;
    # grids start fine enough to resolve the 1/theta = 0.05 transient
    p = make_params(1, lam=1.0)
    errs = []
    for n in (400, 800, 1600):
        grid = ml.TimeGrid(T=1.0, n_steps=n)
        err = np.max(np.abs(model1_riccati_table(p, grid)
                            - model1_D_closed(p, grid.points)))
        errs.append(err)
    assert errs[0] / errs[1] >= 8.0
    assert errs[1] / errs[2] >= 8.0


# --- interpolation -------------------------------------------------------------


def _linear_table():
    grid = ml.TimeGrid(T=1.0, n_steps=2)  # spacing 0.5
    sys_ = ml.OdeSystem(dimension=1, rhs=lambda t, y: np.array([-1.0]),
                        terminal=np.zeros(1), names=("y",))
    return ml.integrate_backward(sys_, grid)


def test_interpolate_exact_at_nodes():
    table = _linear_table()
    for k, t in enumerate(table.grid.points):
        assert table.interpolate(t) == pytest.approx(table.values[k], abs=0)


def test_interpolate_linear_between_nodes():
    table = _linear_table()
    assert table.interpolate(0.25)[0] == pytest.approx(0.75, abs=1e-15)


def test_interpolate_rejects_out_of_range():
    table = _linear_table()
    with pytest.raises(ml.GridError):
        table.interpolate(-0.1)
    with pytest.raises(ml.GridError):
        table.interpolate(1.1)


@given(t=st.floats(0.0, 1.0))
def test_interpolate_reproduces_linear_functions(t):
    table = _linear_table()
    assert table.interpolate(t)[0] == pytest.approx(1.0 - t, abs=1e-12)


def test_constant_table_interpolates_to_constant():
    grid = ml.TimeGrid(T=1.0, n_steps=4)
    table = ml.integrate_backward(_const_system(2.5), grid)
    for t in (0.0, 0.1, 0.33, 0.99, 1.0):
        assert table.interpolate(t)[0] == 2.5


# --- CSV ------------------------------------------------------------------------


def test_csv_round_trip_full_precision():
    p = make_params(1, lam=0.3)
    grid = ml.TimeGrid(T=1.0, n_steps=20)
    table = ml.model1_coeffs(p, grid).table
    text = table.to_csv_text()
    lines = text.strip().split("\n")
    assert lines[0] == "t,A,B,C,D,E,F"
    assert len(lines) == 22
    parsed = np.array([[float(v) for v in line.split(",")[1:]] for line in lines[1:]])
    assert np.array_equal(parsed, table.values)


def test_tail_integral_trapezoid_matches_numpy():
    grid = ml.TimeGrid(T=2.0, n_steps=64)
    f = np.sin(grid.points) + 2.0
    mine = ml.tail_integral_trapezoid(f, grid)
    for k in (0, 10, 40, 63, 64):
        ref = np.trapezoid(f[k:], grid.points[k:]) if k < 64 else 0.0
        assert mine[k] == pytest.approx(ref, abs=1e-12)
