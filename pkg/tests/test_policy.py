import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import maniplab as ml

from conftest import make_params


def test_model1_controls_vanish_at_maturity_stationary(coeff_cache):
    p, c = coeff_cache(1, 0.0)
    ev = ml.control_model1(p, c, t=1.0, q=ml.q_star(p))
    assert ev.u == pytest.approx(0.0, abs=1e-12)
    assert ev.z == 0.0
    assert ev.s_tilde == pytest.approx(p.s0 - p.a * ml.q_star(p))


def test_model1_volatility_reduced_without_position(coeff_cache):
    p, c = coeff_cache(1, 0.0)
    for t in (0.0, 0.3, 0.9):
        assert ml.control_model1(p, c, t, 5.0).z <= 0.0


def test_model1_volatility_raised_for_large_short_position(coeff_cache):
    p, c = coeff_cache(1, 1.0)  # above the 0.2 threshold
    assert ml.control_model1(p, c, 0.0, 0.0).z > 0.0


def test_model2_controls_at_maturity(coeff_cache):
    p, c = coeff_cache(2, 0.7)
    q, s = 3.0, 12.0
    ev = ml.control_model2(p, c, 1.0, q, s)
    assert ev.u == pytest.approx(2.0 * p.lam * p.a / p.kappa * (s - p.a * q), rel=1e-10)
    assert ev.z == 0.0


@pytest.mark.parametrize("lam", [-0.19, -0.1, 0.0, 0.1, 1.0])
def test_model2_volatility_never_negative(lam, coeff_cache):
    p, c = coeff_cache(2, lam)
    for t in np.linspace(0.0, 1.0, 7):
        assert ml.control_model2(p, c, t, 1.0, 9.0).z >= 0.0


def test_model3_zero_position_trader_idle(coeff_cache):
    p, c = coeff_cache(3, 0.0)
    for t in (0.0, 0.5, 1.0):
        assert ml.control_model3(p, c, t, 4.0, 11.0).z == 0.0


def test_model3_controls_at_maturity(coeff_cache):
    p, c = coeff_cache(3, 0.1)
    q, s = 8.0, 9.0
    ev = ml.control_model3(p, c, 1.0, q, s)
    assert ev.u == pytest.approx(2.0 * p.lam * p.a / p.kappa * (s - p.a * q), rel=1e-10)


@pytest.mark.parametrize("lam,sign", [(0.1, -1.0), (-0.05, 1.0)])
def test_model3_trader_volatility_sign(lam, sign, coeff_cache):
    p, c = coeff_cache(3, lam)
    assert sign * ml.control_model3(p, c, 0.0, 0.0, p.s0).z > 0.0


def test_rejects_time_outside_horizon(coeff_cache):
    p, c = coeff_cache(1, 0.0)
    with pytest.raises(ml.AdmissibilityError):
        ml.control_model1(p, c, -0.2, 1.0)
    with pytest.raises(ml.AdmissibilityError):
        ml.control_model1(p, c, 1.2, 1.0)


def test_flags_volatility_floor_violation():
    # inadmissible horizon: z = sigma^2 D / g dips below -1 near t = 0
    p = make_params(1, sigma=2.0, g=0.02)
    c = ml.model1_coeffs(p, ml.TimeGrid(T=1.0, n_steps=500), require_horizon=False)
    with pytest.raises(ml.AdmissibilityError, match="<= -1"):
        ml.control_model1(p, c, 0.0, 0.0)
    # near maturity the control is still above the floor
    assert ml.control_model1(p, c, 0.999, 0.0).z > -1.0


@settings(max_examples=50, deadline=None)
@given(q1=st.floats(-20, 40), q2=st.floats(-20, 40),
       s1=st.floats(-5, 25), s2=st.floats(-5, 25),
       t=st.floats(0.0, 1.0))
def test_drift_control_affine_in_state(q1, q2, s1, s2, t, coeff_cache):
    # midpoint control equals the midpoint of endpoint controls
    for model, lam in ((1, 0.6), (2, 0.6), (3, 0.1)):
        p, c = coeff_cache(model, lam)
        if model == 1:
            u1 = ml.control(p, c, t, q1).u
            u2 = ml.control(p, c, t, q2).u
            um = ml.control(p, c, t, (q1 + q2) / 2).u
        else:
            u1 = ml.control(p, c, t, q1, s1).u
            u2 = ml.control(p, c, t, q2, s2).u
            um = ml.control(p, c, t, (q1 + q2) / 2, (s1 + s2) / 2).u
        assert um == pytest.approx((u1 + u2) / 2, rel=1e-10, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(q=st.floats(-20, 40), s=st.floats(-5, 25), t=st.floats(0.0, 1.0))
def test_volatility_control_state_independent(q, s, t, coeff_cache):
    for model, lam in ((1, 0.6), (2, 0.6), (3, 0.1)):
        p, c = coeff_cache(model, lam)
        ref = ml.control(p, c, t, 0.0, 10.0 if model > 1 else None).z
        got = ml.control(p, c, t, q, s if model > 1 else None).z
        assert got == ref


def test_check_admissible_model2_always(coeff_cache):
    p, c = coeff_cache(2, -0.19)
    rep = ml.check_admissible(p, c)
    assert rep.admissible and rep.z_min >= 0.0 and rep.margin >= 1.0


def test_check_admissible_model1_reports(coeff_cache):
    p, c = coeff_cache(1, 0.0)
    rep = ml.check_admissible(p, c)
    assert rep.admissible and -1.0 < rep.z_min <= 0.0
    assert rep.margin == pytest.approx(rep.z_min + 1.0)


def test_check_admissible_detects_violation():
    # brute-force constructed finite-t_max case: D(0) <= -g/sigma^2
    p = make_params(1, sigma=2.0, g=0.02)
    assert ml.t_max(p) < p.T
    c = ml.model1_coeffs(p, ml.TimeGrid(T=1.0, n_steps=500), require_horizon=False)
    rep = ml.check_admissible(p, c)
    assert not rep.admissible
    assert c.table.col("D")[0] <= -p.g / p.sigma**2


def test_model3_invalid_equilibrium_blocks_controls(coeff_cache):
    p, c = coeff_cache(3, 0.1)
    from dataclasses import replace
    bad = replace(c, equilibrium_valid=False, bw_margin=-0.01)
    with pytest.raises(ml.AdmissibilityError, match="Bw"):
        ml.control_model3(p, bad, 0.0, 0.0, p.s0)
