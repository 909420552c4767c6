"""Model parameters, validation, and scalar quantities derived from them.

Three market variants share one parameter record:

* ``MODEL1`` -- the producer controls both the drift and the volatility of
  her own production rate; the pre-impact price level ``s0`` is constant.
* ``MODEL2`` -- the pre-impact price ``S`` is itself a diffusion; the
  producer controls the production drift and the price volatility.
* ``MODEL3`` -- the producer controls the drift, an opposing trader
  controls the volatility (a two-player game).

A validated instance is immutable and safe to share; every downstream
module takes one of these as its single source of scalar inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum


class ParamError(ValueError):
    """A parameter set failed validation."""


class ConfigError(ValueError):
    """A config file could not be parsed into a parameter set."""


class ModelKind(Enum):
    MODEL1 = 1
    MODEL2 = 2
    MODEL3 = 3

    @property
    def has_price_state(self) -> bool:
        """Models 2 and 3 carry the pre-impact price S as a state variable."""
        return self is not ModelKind.MODEL1


@dataclass(frozen=True)
class ModelParams:
    """All scalar inputs for one model instance.

    s0:     pre-impact price level (initial level for models 2-3)
    a:      price-impact elasticity, a > 0
    g:      volatility-control cost weight, g > 0
    kappa:  drift-control cost weight, kappa > 0
    sigma:  nominal volatility, sigma > 0
    T:      horizon, T > 0
    mu:     price drift (models 2-3; stored but unused by model 1)
    lam:    net derivative position (signed; > 0 means sold)
    q0:     initial production rate
    kind:   which model variant
    """

    s0: float
    a: float
    g: float
    kappa: float
    sigma: float
    T: float
    mu: float = 0.0
    lam: float = 0.0
    q0: float = 0.0
    kind: ModelKind = ModelKind.MODEL1

    def __post_init__(self):
        for name in ("s0", "a", "g", "kappa", "sigma", "T", "mu", "lam", "q0"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ParamError(f"{name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise ParamError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        for name in ("a", "g", "kappa", "sigma", "T"):
            if getattr(self, name) <= 0.0:
                raise ParamError(f"{name} > 0 required, got {getattr(self, name)}")
        if not isinstance(self.kind, ModelKind):
            raise ParamError(f"kind must be a ModelKind, got {self.kind!r}")

    def with_lambda(self, lam: float) -> "ModelParams":
        return replace(self, lam=lam)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Parameter-level admissibility for the configured horizon.

    ``t_max`` is the largest admissible horizon for model 1 (may be +inf);
    models 2 and 3 have no parameter-level horizon bound, so t_max is +inf
    and ``admissible`` is True for them.
    """

    theta: float
    H: float
    t_max: float
    admissible: bool
    reason: str


def theta(params: ModelParams) -> float:
    """Mean-reversion scale sqrt(8 a / kappa) of the quadratic coefficient."""
    return math.sqrt(8.0 * params.a / params.kappa)


def horizon_margin_constant(params: ModelParams) -> float:
    """H = 1 - (2 lam a / kappa) (lam a^2 - g / sigma^2).

    When H <= 0 the volatility control stays admissible on any horizon.
    """
    p = params
    return 1.0 - (2.0 * p.lam * p.a / p.kappa) * (p.lam * p.a**2 - p.g / p.sigma**2)


def t_max(params: ModelParams) -> float:
    """Largest admissible horizon for model 1 (greater horizons push the
    volatility control below the -1 floor).

    Returns +inf when H <= 0 or when the arccoth argument is <= 1: in both
    cases coth(theta T / 2) > (2 sigma^2 a / theta g) H holds for every T
    because coth > 1 on (0, inf).
    """
    th = theta(params)
    H = horizon_margin_constant(params)
    if H <= 0.0:
        return math.inf
    x = 2.0 * params.sigma**2 * params.a * H / (th * params.g)
    if x <= 1.0:
        return math.inf
    # (2/theta) * arccoth(x) with arccoth(x) = 0.5 ln((x+1)/(x-1))
    return math.log((x + 1.0) / (x - 1.0)) / th


def lambda_threshold(params: ModelParams) -> float:
    """Position size sqrt(kappa / (2 a^3)) above which the model-1 producer
    optimally raises the volatility."""
    return math.sqrt(params.kappa / (2.0 * params.a**3))


def q_star(params: ModelParams) -> float:
    """Production rate s0 / (2a) that maximises the running profit."""
    return params.s0 / (2.0 * params.a)


def admissibility_report(params: ModelParams) -> AdmissibilityReport:
    th = theta(params)
    H = horizon_margin_constant(params)
    tm = t_max(params)
    if params.kind is not ModelKind.MODEL1:
        return AdmissibilityReport(th, H, math.inf, True, "no horizon bound for this model")
    # T == t_max is treated as inadmissible (strict inequality).
    if params.T < tm:
        return AdmissibilityReport(th, H, tm, True, "T < T_max")
    return AdmissibilityReport(th, H, tm, False, f"T >= T_max (T={params.T}, T_max={tm})")


def require_admissible(params: ModelParams) -> ModelParams:
    """Validation choke-point: raise unless the horizon is admissible."""
    rep = admissibility_report(params)
    if not rep.admissible:
        raise ParamError(rep.reason)
    return params


# --- flat key = value config files -----------------------------------------

_CONFIG_KEYS = ("s0", "a", "g", "kappa", "sigma", "T", "mu", "lambda", "q0", "model")
_REQUIRED_KEYS = ("s0", "a", "g", "kappa", "sigma", "T", "model")
_DEFAULTS = {"mu": 0.0, "lambda": 0.0, "q0": 0.0}


def parse_config(text: str) -> ModelParams:
    """Parse a flat ``key = value`` config into validated parameters.

    Known keys: s0, a, g, kappa, sigma, T, mu, lambda, q0, model.
    Unknown or duplicate keys are rejected; numbers are decimal floats;
    model is 1, 2, or 3. The returned instance has passed the full
    admissibility gate (including the model-1 horizon bound).
    """
    seen: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        seen[key] = value

    missing = [k for k in _REQUIRED_KEYS if k not in seen]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    try:
        model_no = int(seen["model"])
    except ValueError as exc:
        raise ConfigError(f"model must be 1, 2 or 3, got {seen['model']!r}") from exc
    if model_no not in (1, 2, 3):
        raise ConfigError(f"model must be 1, 2 or 3, got {model_no}")

    numbers = {}
    for key in _CONFIG_KEYS:
        if key == "model":
            continue
        value = seen.get(key)
        if value is None:
            numbers[key] = _DEFAULTS[key]
            continue
        try:
            numbers[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: not a decimal number: {value!r}") from exc

    params = ModelParams(
        s0=numbers["s0"],
        a=numbers["a"],
        g=numbers["g"],
        kappa=numbers["kappa"],
        sigma=numbers["sigma"],
        T=numbers["T"],
        mu=numbers["mu"],
        lam=numbers["lambda"],
        q0=numbers["q0"],
        kind=ModelKind(model_no),
    )
    return require_admissible(params)


def load_config(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_text(params: ModelParams) -> str:
    """Render parameters back to the flat config format (full precision)."""
    lines = [
        f"s0 = {params.s0:.17g}",
        f"a = {params.a:.17g}",
        f"g = {params.g:.17g}",
        f"kappa = {params.kappa:.17g}",
        f"sigma = {params.sigma:.17g}",
        f"T = {params.T:.17g}",
        f"mu = {params.mu:.17g}",
        f"lambda = {params.lam:.17g}",
        f"q0 = {params.q0:.17g}",
        f"model = {params.kind.value}",
    ]
    return "\n".join(lines) + "\n"
