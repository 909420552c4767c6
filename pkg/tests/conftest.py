import pytest

import maniplab as ml

# The demo parameter set used throughout: s0=10, a=0.5, g=0.1, kappa=0.01,
# sigma=1, T=1, mu=0. Stationary rate q* = 10, volatility threshold 0.2.
BASE = dict(s0=10.0, a=0.5, g=0.1, kappa=0.01, sigma=1.0, T=1.0, mu=0.0)

KINDS = {1: ml.ModelKind.MODEL1, 2: ml.ModelKind.MODEL2, 3: ml.ModelKind.MODEL3}


def make_params(model: int, lam: float = 0.0, **overrides) -> ml.ModelParams:
    kw = {**BASE, **overrides}
    return ml.ModelParams(lam=lam, kind=KINDS[model], **kw)


@pytest.fixture
def params_factory():
    return make_params


@pytest.fixture(scope="session")
def coeff_cache():
    """Session cache of coefficient tables keyed by (model, lam, q0, n)."""
    cache = {}

    def get(model: int, lam: float = 0.0, q0: float = 0.0, n_steps: int = 2000):
        key = (model, lam, q0, n_steps)
        if key not in cache:
            p = make_params(model, lam=lam, q0=q0)
            grid = ml.TimeGrid(T=p.T, n_steps=n_steps)
            cache[key] = (p, ml.build_coeffs(p, grid))
        return cache[key]

    return get
