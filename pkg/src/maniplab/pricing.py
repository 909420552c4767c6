"""Closed-form claim prices, hedges, value functions, and position sweeps.

The claim pays the squared impacted price at maturity. Its no-arbitrage
price decomposes into the squared current impacted price plus a
deterministic tail integral of the controlled variance; hedging is linear
in the underlying (the production rate for model 1, the impacted price for
models 2-3, the two conventions differing by the impact chain rule).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coeffs import (
    Model1Coeffs,
    Model2Coeffs,
    Model3Coeffs,
    SingularityError,
    build_coeffs,
    price_tail,
)
from .ode import DivergenceError, TimeGrid
from .params import (
    ModelKind,
    ModelParams,
    ParamError,
    admissibility_report,
    q_star,
)
from .policy import check_admissible
from .simulate import MeanCI, Measure, SimConfig, estimate, simulate


@dataclass(frozen=True)
class PriceReport:
    """One sweep point: prices and time-zero values at a given position."""

    lam: float
    h0: float
    h0_no_manip: float
    v0: float
    w0: float | None
    E_hT_P: MeanCI | None = None
    skipped: bool = False
    reason: str = ""


def _tail_at(coeffs, t: float) -> float:
    tail = price_tail(coeffs)
    grid = coeffs.table.grid
    if not (-1e-12 <= t <= grid.T * (1.0 + 1e-12)):
        raise ParamError(f"t = {t} outside [0, {grid.T}]")
    return float(np.interp(min(max(t, 0.0), grid.T), grid.points, tail))


def price_h(coeffs, t: float, q: float, s: float | None = None) -> float:
    """No-arbitrage claim price at state (t, q[, s])."""
    p = coeffs.params
    if p.kind is ModelKind.MODEL1:
        moneyness = p.s0 - p.a * q
    else:
        if s is None:
            raise ParamError("models 2-3 need the pre-impact price s")
        moneyness = s - p.a * q
    return float(moneyness**2 + _tail_at(coeffs, t))


def hedge_delta(params: ModelParams, q: float, s: float | None = None) -> float:
    """Replication coefficient against the hedge underlying.

    Model 1 hedges in the production rate itself: 2 a (a q - s0). Models 2-3
    hedge in the impacted price: 2 (s - a q). The two differ by the impact
    chain-rule factor -a.
    """
    if params.kind is ModelKind.MODEL1:
        return 2.0 * params.a * (params.a * q - params.s0)
    if s is None:
        raise ParamError("models 2-3 need the pre-impact price s")
    return 2.0 * (s - params.a * q)


def h0_no_manip(params: ModelParams) -> float:
    """Claim price with the volatility control forced to zero."""
    p = params
    base = (p.s0 - p.a * p.q0) ** 2
    if p.kind is ModelKind.MODEL1:
        return base + p.sigma**2 * p.a**2 * p.T
    return base + p.sigma**2 * p.T


def value_functions(coeffs, *, swap_model3_assignment: bool = False):
    """Time-zero values (v0, w0); w0 is None outside model 3.

    ``swap_model3_assignment`` evaluates the alternate coefficient-to-player
    assignment for model 3 so the two conventions can be compared; the
    default assigns (Av..Fv) to the producer.
    """
    p = coeffs.params
    if isinstance(coeffs, Model1Coeffs):
        row = coeffs.table.values[0]
        names = coeffs.table.names
        D, E, F = (row[names.index(n)] for n in "DEF")
        return float(D * p.q0**2 + E * p.q0 + F), None

    def quad(suffix: str) -> float:
        names = coeffs.table.names
        row = coeffs.table.values[0]
        A, B, C, D, E, F = (row[names.index(n + suffix)] for n in "ABCDEF")
        return float(
            A * p.q0**2 + B * p.s0**2 + C * p.q0 * p.s0 + D * p.q0 + E * p.s0 + F
        )

    if isinstance(coeffs, Model2Coeffs):
        return quad(""), None
    v0 = quad("v")
    w0 = quad("w")
    if swap_model3_assignment:
        v0, w0 = w0, v0
    return v0, w0


# --- position sweeps ---------------------------------------------------------

SWEEP_POINTS = 57
# Uniform grids bracketing the positions of interest. The model-3 grid gets
# a fixed refinement cluster near zero from the short side: the region where
# both players benefit can be narrower than the uniform spacing.
_M3_CLUSTER = (-0.02, -0.015, -0.01, -0.005, -0.0025, -0.002, -0.0015,
               -0.001, -0.0005, 0.0)


def default_lambda_grid(kind: ModelKind) -> np.ndarray:
    if kind is ModelKind.MODEL3:
        base = np.linspace(-0.1, 0.2, SWEEP_POINTS)
        return np.unique(np.round(np.concatenate([base, _M3_CLUSTER]), 12))
    return np.round(np.linspace(-0.2, 1.2, SWEEP_POINTS), 12)


def sweep_lambda(
    params: ModelParams,
    lambdas=None,
    simconfig: SimConfig | None = None,
    *,
    n_steps_coeffs: int = 2000,
) -> list[PriceReport]:
    """One PriceReport per position; inadmissible positions are skipped
    with a flag rather than aborting the sweep.

    When ``simconfig`` is given, a physical-measure Monte-Carlo estimate of
    the expected payoff is attached; the shared seed gives common random
    numbers across the sweep.
    """
    lambdas = default_lambda_grid(params.kind) if lambdas is None else np.asarray(lambdas, dtype=float)
    reports: list[PriceReport] = []
    for lam in lambdas:
        pl = params.with_lambda(float(lam))
        rep = admissibility_report(pl)
        if not rep.admissible:
            reports.append(PriceReport(float(lam), math.nan, math.nan, math.nan,
                                       None, None, True, rep.reason))
            continue
        grid = TimeGrid(T=pl.T, n_steps=n_steps_coeffs)
        try:
            c = build_coeffs(pl, grid)
        except (DivergenceError, SingularityError) as exc:
            reports.append(PriceReport(float(lam), math.nan, math.nan, math.nan,
                                       None, None, True, str(exc)))
            continue
        grid_rep = check_admissible(pl, c)
        if not grid_rep.admissible or not getattr(c, "equilibrium_valid", True):
            reason = (f"volatility control hits the floor (min z = "
                      f"{grid_rep.z_min:.4g})" if not grid_rep.admissible
                      else f"equilibrium invalid (Bw margin {c.bw_margin:.4g})")
            reports.append(PriceReport(float(lam), math.nan, math.nan, math.nan,
                                       None, None, True, reason))
            continue
        v0, w0 = value_functions(c)
        h0 = price_h(c, 0.0, pl.q0, pl.s0 if pl.kind.has_price_state else None)
        mc = None
        if simconfig is not None:
            ens = simulate(pl, c, simconfig, store_paths=0, aggregates=False,
                           interpolate=True)
            mc = estimate("payoff", ens)
        reports.append(PriceReport(float(lam), h0, h0_no_manip(pl), v0, w0, mc))
    return reports


def sweep_power_cost(
    params: ModelParams,
    a_values=(0.1, 0.5, 0.9),
    g_values=(0.05, 0.1, 0.5),
    lambdas=None,
    *,
    n_steps_coeffs: int = 2000,
) -> list[tuple[float, float, PriceReport]]:
    """Model-3 sweep across market power and intervention cost.

    The initial production rate is re-anchored to the stationary rate
    s0 / (2a) for each market-power value, removing the transitory phase.
    """
    if params.kind is not ModelKind.MODEL3:
        raise ParamError("power/cost sweep is a model-3 study")
    rows: list[tuple[float, float, PriceReport]] = []
    for a in a_values:
        for g in g_values:
            base = replace(params, a=float(a), g=float(g))
            base = replace(base, q0=q_star(base))
            for rep in sweep_lambda(base, lambdas, n_steps_coeffs=n_steps_coeffs):
                rows.append((float(a), float(g), rep))
    return rows


def sweep_csv_text(reports: list[PriceReport]) -> str:
    """Sweep rows as ``lambda,h0,h0_z0,E_hT_P,E_hT_se,v0,w0``."""
    lines = ["lambda,h0,h0_z0,E_hT_P,E_hT_se,v0,w0"]
    for r in reports:
        mc_mean = f"{r.E_hT_P.mean:.17g}" if r.E_hT_P is not None else ""
        mc_se = f"{r.E_hT_P.std_error:.17g}" if r.E_hT_P is not None else ""
        w0 = f"{r.w0:.17g}" if r.w0 is not None else ""
        lines.append(
            f"{r.lam:.17g},{r.h0:.17g},{r.h0_no_manip:.17g},{mc_mean},{mc_se},"
            f"{r.v0:.17g},{w0}"
        )
    return "\n".join(lines) + "\n"
