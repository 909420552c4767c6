import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import maniplab as ml
from maniplab.params import config_text, parse_config

from conftest import make_params


def test_theta_values():
    assert ml.theta(make_params(1)) == 20.0  # sqrt(8 * 0.5 / 0.01)
    assert ml.theta(make_params(1, a=2.0, kappa=1.0)) == 4.0
    p = make_params(1, a=0.125, kappa=1.0)  # a = kappa / 8
    assert ml.theta(p) == pytest.approx(1.0, rel=1e-15)


def test_lambda_threshold_values():
    assert ml.lambda_threshold(make_params(1)) == pytest.approx(0.2, rel=1e-15)
    assert ml.lambda_threshold(make_params(1, a=1.0, kappa=2.0)) == pytest.approx(1.0)
    # kappa = 2 a^3 gives exactly 1
    p = make_params(1, a=0.7, kappa=2 * 0.7**3)
    assert ml.lambda_threshold(p) == pytest.approx(1.0, rel=1e-15)


def test_q_star_values():
    assert ml.q_star(make_params(1)) == 10.0
    assert ml.q_star(make_params(1, s0=0.0)) == 0.0
    assert ml.q_star(make_params(1, s0=1.0)) == 1.0


def test_t_max_infinite_cases():
    # lam = 1: H = 1 - 100 * (0.25 - 0.1) = -14 < 0
    p = make_params(1, lam=1.0)
    rep = ml.admissibility_report(p)
    assert rep.H == pytest.approx(-14.0)
    assert rep.t_max == math.inf and rep.admissible

    # lam = -0.1: H = 1 - (-10) * (-0.125) = -0.25 < 0
    p = make_params(1, lam=-0.1)
    rep = ml.admissibility_report(p)
    assert rep.H == pytest.approx(-0.25)
    assert rep.t_max == math.inf

    # lam = 0: H = 1 but the arccoth argument is 1/2 <= 1
    p = make_params(1, lam=0.0)
    rep = ml.admissibility_report(p)
    assert rep.H == 1.0
    assert rep.t_max == math.inf


def test_t_max_finite_case():
    # sigma = 2, g = 0.02, lam = 0: H = 1, argument = 2*4*0.5/(20*0.02) = 10
    p = make_params(1, sigma=2.0, g=0.02)
    tm = ml.t_max(p)
    assert tm == pytest.approx(math.log(11.0 / 9.0) / 20.0, rel=1e-14)
    # coth(theta * t_max / 2) must reproduce the argument
    y = ml.theta(p) * tm / 2.0
    coth = (math.exp(2 * y) + 1.0) / (math.exp(2 * y) - 1.0)
    assert coth == pytest.approx(10.0, rel=1e-12)

    assert not ml.admissibility_report(p).admissible  # T = 1 > t_max
    with pytest.raises(ml.ParamError):
        ml.require_admissible(p)
    # strictly below the bound is fine, equality is not
    ok = make_params(1, sigma=2.0, g=0.02, T=tm * 0.999)
    assert ml.admissibility_report(ok).admissible
    eq = make_params(1, sigma=2.0, g=0.02, T=tm)
    assert not ml.admissibility_report(eq).admissible


def test_models_2_3_have_no_horizon_bound():
    for model in (2, 3):
        rep = ml.admissibility_report(make_params(model, lam=1.0, T=50.0))
        assert rep.admissible and rep.t_max == math.inf


@pytest.mark.parametrize("field", ["a", "g", "kappa", "sigma", "T"])
def test_positivity_enforced(field):
    with pytest.raises(ml.ParamError):
        make_params(1, **{field: 0.0})
    with pytest.raises(ml.ParamError):
        make_params(1, **{field: -1.0})


def test_non_finite_rejected():
    with pytest.raises(ml.ParamError):
        make_params(1, s0=float("nan"))
    with pytest.raises(ml.ParamError):
        make_params(2, mu=float("inf"))


@given(a=st.floats(1e-6, 1e6), kappa=st.floats(1e-6, 1e6))
def test_theta_identity(a, kappa):
    p = make_params(1, a=a, kappa=kappa)
    assert ml.theta(p) ** 2 * kappa == pytest.approx(8.0 * a, rel=1e-12)


@given(a=st.floats(1e-4, 1e3), kappa=st.floats(1e-6, 1e6))
def test_lambda_threshold_identity(a, kappa):
    p = make_params(1, a=a, kappa=kappa)
    assert ml.lambda_threshold(p) ** 2 * 2.0 * a**3 == pytest.approx(kappa, rel=1e-12)


_any_float = st.floats(allow_nan=True, allow_infinity=True, width=64)


@settings(max_examples=200)
@given(
    s0=_any_float, a=_any_float, g=_any_float, kappa=_any_float,
    sigma=_any_float, T=_any_float, mu=_any_float, lam=_any_float,
    q0=_any_float, model=st.sampled_from([1, 2, 3]),
)
def test_validation_is_total(s0, a, g, kappa, sigma, T, mu, lam, q0, model):
    # every input either validates or raises the structured rejection
    try:
        ml.ModelParams(s0=s0, a=a, g=g, kappa=kappa, sigma=sigma, T=T,
                       mu=mu, lam=lam, q0=q0, kind=ml.ModelKind(model))
    except ml.ParamError:
        pass


# --- config files ------------------------------------------------------------

GOOD = """
# demo configuration
s0 = 10
a = 0.5
g = 0.1
kappa = 0.01
sigma = 1
T = 1
mu = 0.0
lambda = 1
q0 = 0
model = 1
"""


def test_parse_config_round_trip():
    p = parse_config(GOOD)
    assert p.kind is ml.ModelKind.MODEL1
    assert p.lam == 1.0 and p.s0 == 10.0 and p.q0 == 0.0
    again = parse_config(config_text(p))
    assert again == p


def test_parse_config_defaults():
    p = parse_config("s0=10\na=0.5\ng=0.1\nkappa=0.01\nsigma=1\nT=1\nmodel=2\n")
    assert p.mu == 0.0 and p.lam == 0.0 and p.q0 == 0.0
    assert p.kind is ml.ModelKind.MODEL2


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("s0 = 10\nzz = 1\n", "unknown key"),
        ("s0 = 10\ns0 = 11\n", "duplicate key"),
        ("s0 = ten\na=1\ng=1\nkappa=1\nsigma=1\nT=1\nmodel=1\n", "not a decimal"),
        ("a=1\ng=1\nkappa=1\nsigma=1\nT=1\nmodel=1\n", "missing required"),
        ("s0=1\na=1\ng=1\nkappa=1\nsigma=1\nT=1\nmodel=7\n", "model must be"),
        ("s0\n", "expected 'key = value'"),
    ],
)
def test_parse_config_rejections(text, fragment):
    with pytest.raises(ml.ConfigError, match=fragment):
        parse_config(text)


def test_parse_config_enforces_horizon():
    # model 1 with a finite t_max smaller than T must be rejected at load
    text = "s0=10\na=0.5\ng=0.02\nkappa=0.01\nsigma=2\nT=1\nmodel=1\n"
    with pytest.raises(ml.ParamError, match="T_max"):
        parse_config(text)
