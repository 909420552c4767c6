"""Coefficient tables for the three models' quadratic value/price functions.

Each model's value function (and claim price) is quadratic in the state with
deterministic time-dependent coefficients. The quadratic coefficient solves a
scalar Riccati equation with a known closed form; the remaining coefficients
solve linear ODEs integrated backward by RK4 as one joint state vector, which
avoids interpolation error between separately-solved components.

Column conventions (all vanish at T unless noted):

* model 1: A == a^2 and B == -2 a s0 are constants of the price expansion,
  C(T) = s0^2; D, E, F are the value-function coefficients.
* model 2: A..F value coefficients; Fbar is the price tail
  sigma^2 * integral_t^T (1 + sigma^2 B / g).
* model 3: Av..Fv producer value, Aw..Fw trader value, Fphi the price tail
  driven by the trader's volatility coefficient Bw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ode import (
    CoefficientTable,
    OdeSystem,
    TimeGrid,
    integrate_backward,
    tail_integral_trapezoid,
)
from .params import ModelKind, ModelParams, ParamError, require_admissible, theta


class SingularityError(ArithmeticError):
    """The closed-form denominator vanishes inside the horizon."""


DEFAULT_N_STEPS = 10_000


def default_grid(params: ModelParams, n_steps: int = DEFAULT_N_STEPS) -> TimeGrid:
    return TimeGrid(T=params.T, n_steps=n_steps)


# --- closed form for the quadratic Riccati coefficient ----------------------
#
# y' = a - (2/kappa) (y - lam a^2)^2, y(T) = 0, shared by model 1 (D),
# model 2 (A) and model 3 (Av). With theta = sqrt(8a/kappa), c = a - 2 lam^2
# a^4 / kappa, beta = 4 lam a^2 / kappa and X = theta (T - t):
#
#   y(t) = -2 c (1 - e^-X) / [theta (1 + e^-X) + beta (1 - e^-X)]
#
# (the e^-X form is overflow-safe for large theta T). The denominator has a
# root inside the horizon iff beta < -theta and the escape time is reached,
# in which case no global solution exists and evaluation reports it.


def model1_D_closed(params: ModelParams, t) -> float | np.ndarray:
    """Closed-form quadratic coefficient at time(s) ``t`` in [0, T]."""
    p = params
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-12) or np.any(t_arr > p.T * (1.0 + 1e-12)):
        raise ParamError(f"t outside [0, {p.T}]")
    th = theta(p)
    c = p.a - 2.0 * p.lam**2 * p.a**4 / p.kappa
    beta = 4.0 * p.lam * p.a**2 / p.kappa
    em = np.exp(-th * (p.T - t_arr))
    den = th * (1.0 + em) + beta * (1.0 - em)
    if np.any(den <= th * 1e-12):
        raise SingularityError(
            "closed-form denominator vanishes inside the horizon "
            f"(lam = {p.lam}): the Riccati solution escapes before t = 0"
        )
    out = -2.0 * c * (1.0 - em) / den
    return float(out) if np.isscalar(t) else out


def riccati_escape_time(params: ModelParams) -> float | None:
    """Time-to-maturity at which the closed form blows up, or None."""
    th = theta(params)
    beta = 4.0 * params.lam * params.a**2 / params.kappa
    if beta >= -th:
        return None
    return math.log((beta - th) / (beta + th)) / th


def model1_riccati_table(params: ModelParams, grid: TimeGrid) -> np.ndarray:
    """RK4 integration of the quadratic-coefficient Riccati on the grid.

    The independent route against the closed form: the two must agree to
    integrator accuracy wherever a global solution exists.
    """
    p = params
    la2 = p.lam * p.a**2

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([p.a - (2.0 / p.kappa) * (y[0] - la2) ** 2])

    system = OdeSystem(dimension=1, rhs=rhs, terminal=np.zeros(1), names=("D",))
    return integrate_backward(system, grid).col("D")


# --- model 1 ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Model1Coeffs:
    params: ModelParams
    table: CoefficientTable  # names (A, B, C, D, E, F)

    @property
    def kind(self) -> ModelKind:
        return ModelKind.MODEL1


def _model1_linear_rhs(params: ModelParams):
    """Forward derivatives of (C, E, F); D comes from the closed form."""
    p = params
    la2 = p.lam * p.a**2
    two_k = 2.0 / p.kappa
    c_src = 2.0 * p.a * p.lam * p.s0

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        C, E, F = y
        D = model1_D_closed(p, min(max(t, 0.0), p.T))
        dC = -p.sigma**2 * p.a**2 * (1.0 + p.sigma**2 / p.g * D)
        dE = -p.s0 - two_k * (D - la2) * (E + c_src)
        dF = (
            -(p.sigma**4 / (2.0 * p.g)) * D * D
            - p.sigma**2 * D
            - (1.0 / (2.0 * p.kappa)) * (E + c_src) ** 2
        )
        return np.array([dC, dE, dF])

    return rhs


def model1_coeffs(
    params: ModelParams,
    grid: TimeGrid | None = None,
    *,
    require_horizon: bool = True,
) -> Model1Coeffs:
    """Build the model-1 table: D from the closed form, (C, E, F) by RK4.

    ``require_horizon=False`` bypasses the T < T_max gate so that
    inadmissible parameter sets can still be examined diagnostically.
    """
    if params.kind is not ModelKind.MODEL1:
        raise ParamError(f"model-1 coefficients requested for {params.kind}")
    if require_horizon:
        require_admissible(params)
    grid = grid or default_grid(params)
    p = params
    D = model1_D_closed(p, grid.points)
    system = OdeSystem(
        dimension=3,
        rhs=_model1_linear_rhs(p),
        terminal=np.array([p.s0**2, 0.0, 0.0]),
        names=("C", "E", "F"),
    )
    lin = integrate_backward(system, grid)
    n = grid.n_steps
    values = np.empty((n + 1, 6))
    values[:, 0] = p.a**2
    values[:, 1] = -2.0 * p.a * p.s0
    values[:, 2] = lin.col("C")
    values[:, 3] = D
    values[:, 4] = lin.col("E")
    values[:, 5] = lin.col("F")
    table = CoefficientTable(grid=grid, names=("A", "B", "C", "D", "E", "F"), values=values)
    return Model1Coeffs(params=params, table=table)


# --- model 2 ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Model2Coeffs:
    params: ModelParams
    table: CoefficientTable  # names (A, B, C, D, E, F, Fbar)

    @property
    def kind(self) -> ModelKind:
        return ModelKind.MODEL2


def model2_value_rhs(params: ModelParams):
    """Forward derivatives of the six value coefficients (A, B, C, D, E, F)."""
    p = params
    la2 = p.lam * p.a**2
    tla = 2.0 * p.lam * p.a

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        A, B, C, D, E, F = y
        dA = p.a - (2.0 / p.kappa) * (A - la2) ** 2
        dB = -(1.0 / (2.0 * p.kappa)) * (tla + C) ** 2
        dC = -1.0 - (2.0 / p.kappa) * (tla + C) * (A - la2)
        dD = -(2.0 / p.kappa) * D * (A - la2) - p.mu * (C + tla)
        dE = -(1.0 / p.kappa) * D * (C + tla) - 2.0 * p.mu * (B - p.lam)
        dF = (
            -0.5 * p.sigma**4 * B * B / p.g
            - D * D / (2.0 * p.kappa)
            - p.mu * E
            - p.sigma**2 * B
        )
        return np.array([dA, dB, dC, dD, dE, dF])

    return rhs


def model2_coeffs(params: ModelParams, grid: TimeGrid | None = None) -> Model2Coeffs:
    if params.kind is not ModelKind.MODEL2:
        raise ParamError(f"model-2 coefficients requested for {params.kind}")
    grid = grid or default_grid(params)
    p = params
    system = OdeSystem(
        dimension=6,
        rhs=model2_value_rhs(p),
        terminal=np.zeros(6),
        names=("A", "B", "C", "D", "E", "F"),
    )
    val = integrate_backward(system, grid)
    fbar = p.sigma**2 * tail_integral_trapezoid(
        1.0 + p.sigma**2 / p.g * val.col("B"), grid
    )
    values = np.column_stack([val.values, fbar])
    table = CoefficientTable(
        grid=grid, names=("A", "B", "C", "D", "E", "F", "Fbar"), values=values
    )
    return Model2Coeffs(params=params, table=table)


# --- model 3 ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Model3Coeffs:
    params: ModelParams
    table: CoefficientTable  # names (Av..Fv, Aw..Fw, Fphi)
    equilibrium_valid: bool  # Bw > -g/sigma^2 held on the whole grid
    bw_margin: float         # min(Bw) + g/sigma^2

    @property
    def kind(self) -> ModelKind:
        return ModelKind.MODEL3


_M3_NAMES = ("Av", "Bv", "Cv", "Dv", "Ev", "Fv", "Aw", "Bw", "Cw", "Dw", "Ew", "Fw")


def model3_value_rhs(params: ModelParams):
    """Forward derivatives of the eleven integrated coefficients.

    Av enters through its closed form (same Riccati as model 1's D), so the
    joint state is (Bv, Cv, Dv, Ev, Fv, Aw, Bw, Cw, Dw, Ew, Fw).
    """
    p = params
    la2 = p.lam * p.a**2
    tla = 2.0 * p.lam * p.a

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        Bv, Cv, Dv, Ev, Fv, Aw, Bw, Cw, Dw, Ew, Fw = y
        Av = model1_D_closed(p, min(max(t, 0.0), p.T))
        dBv = -(1.0 / (2.0 * p.kappa)) * (Cv + tla) ** 2
        dCv = -1.0 - (2.0 / p.kappa) * (Av - la2) * (Cv + tla)
        dDv = -p.mu * (Cv + tla) - (2.0 / p.kappa) * Dv * (Av - la2)
        dEv = -2.0 * p.mu * (Bv - p.lam) - (1.0 / p.kappa) * Dv * (Cv + tla)
        dFv = (
            -p.mu * Ev
            - Dv * Dv / (2.0 * p.kappa)
            - p.sigma**2 * (1.0 + p.sigma**2 / p.g * Bw) * Bv
        )
        dAw = -(4.0 / p.kappa) * (Av - la2) * (Aw + la2)
        dBw = -(1.0 / p.kappa) * (Cw - tla) * (Cv + tla)
        dCw = -(2.0 / p.kappa) * ((Av - la2) * (Cw - tla) + (Aw + la2) * (Cv + tla))
        dDw = (
            -p.mu * (Cw - tla)
            - (2.0 / p.kappa) * Dv * (Aw + la2)
            - (2.0 / p.kappa) * Dw * (Av - la2)
        )
        dEw = (
            -2.0 * p.mu * (Bw + p.lam)
            - (1.0 / p.kappa) * Dw * (Cv + tla)
            - (1.0 / p.kappa) * Dv * (Cw - tla)
        )
        dFw = (
            -p.mu * Ew
            - Dv * Dw / p.kappa
            - p.sigma**2 * Bw
            - p.sigma**4 / (2.0 * p.g) * Bw * Bw
        )
        return np.array([dBv, dCv, dDv, dEv, dFv, dAw, dBw, dCw, dDw, dEw, dFw])

    return rhs


def model3_coeffs(params: ModelParams, grid: TimeGrid | None = None) -> Model3Coeffs:
    if params.kind is not ModelKind.MODEL3:
        raise ParamError(f"model-3 coefficients requested for {params.kind}")
    grid = grid or default_grid(params)
    p = params
    Av = model1_D_closed(p, grid.points)
    system = OdeSystem(
        dimension=11,
        rhs=model3_value_rhs(p),
        terminal=np.zeros(11),
        names=_M3_NAMES[1:],
    )
    lin = integrate_backward(system, grid)
    bw = lin.col("Bw")
    fphi = p.sigma**2 * tail_integral_trapezoid(1.0 + p.sigma**2 / p.g * bw, grid)
    values = np.column_stack([Av, lin.values, fphi])
    table = CoefficientTable(grid=grid, names=_M3_NAMES + ("Fphi",), values=values)
    margin = float(bw.min()) + p.g / p.sigma**2
    return Model3Coeffs(
        params=params,
        table=table,
        equilibrium_valid=margin > 0.0,
        bw_margin=margin,
    )


def build_coeffs(params: ModelParams, grid: TimeGrid | None = None):
    """Dispatch to the model-specific builder."""
    if params.kind is ModelKind.MODEL1:
        return model1_coeffs(params, grid)
    if params.kind is ModelKind.MODEL2:
        return model2_coeffs(params, grid)
    return model3_coeffs(params, grid)


def price_tail(coeffs) -> np.ndarray:
    """Deterministic part of the claim price on the grid.

    tail(t_k) is the integral from t_k to T of the effective variance of the
    hedge underlying: sigma^2 a^2 (1 + sigma^2 D / g) for model 1 (hedging in
    q), sigma^2 (1 + sigma^2 B / g) resp. Bw for models 2-3 (hedging in the
    impacted price). Trapezoid on the coefficient grid throughout; models
    2-3 already carry it as the Fbar / Fphi column.
    """
    p = coeffs.params
    if isinstance(coeffs, Model1Coeffs):
        integrand = 1.0 + p.sigma**2 / p.g * coeffs.table.col("D")
        return p.sigma**2 * p.a**2 * tail_integral_trapezoid(integrand, coeffs.table.grid)
    if isinstance(coeffs, Model2Coeffs):
        return coeffs.table.col("Fbar").copy()
    if isinstance(coeffs, Model3Coeffs):
        return coeffs.table.col("Fphi").copy()
    raise ParamError(f"unknown coefficient set {type(coeffs).__name__}")


def model1_E_integral(params: ModelParams, grid: TimeGrid) -> np.ndarray:
    """Cross-check path for model 1's E: the nested-integral representation

        E(t) = s0 * int_t^T exp((2/k) int_t^u (D - lam a^2)) *
               (1 + (4 a lam / k) (D(u) - lam a^2)) du

    evaluated with trapezoid quadrature on the grid. Used only to validate
    the RK4 route.
    """
    p = params
    pts = grid.points
    D = model1_D_closed(p, pts)
    la2 = p.lam * p.a**2
    shift = D - la2
    # running integral R(t_k) = int_0^{t_k} (2/k) (D - lam a^2), so the
    # exponential factor is exp(R(u) - R(t))
    steps = 0.5 * grid.h * (shift[1:] + shift[:-1]) * (2.0 / p.kappa)
    R = np.concatenate([[0.0], np.cumsum(steps)])
    f = np.exp(R) * (1.0 + 4.0 * p.a * p.lam / p.kappa * shift)
    tail = tail_integral_trapezoid(f, grid)
    return p.s0 * np.exp(-R) * tail
