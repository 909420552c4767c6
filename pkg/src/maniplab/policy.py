"""Optimal/equilibrium feedback controls evaluated at arbitrary states.

Controls are read off the coefficient tables (grid lookup plus linear
interpolation), never by re-solving ODEs: simulation calls these formulas in
a hot loop. In every model the drift control is affine in the state and the
volatility control depends on time only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import Model1Coeffs, Model2Coeffs, Model3Coeffs
from .params import ModelKind, ModelParams


class AdmissibilityError(ValueError):
    """A control violates the z > -1 floor (or the game's validity condition)."""


@dataclass(frozen=True)
class PolicyEval:
    """Controls and prices at one state.

    ``s`` is the pre-impact price (models 2-3; None for model 1) and
    ``s_tilde`` the impacted market price: s0 - a q for model 1, s - a q
    otherwise.
    """

    t: float
    q: float
    s: float | None
    u: float
    z: float
    s_tilde: float


@dataclass(frozen=True)
class GridAdmissibility:
    """Grid-wide report on the volatility-control floor z > -1.

    ``margin`` is min_t z(t) + 1; positive means admissible. For model 3 the
    same quantity expresses the equilibrium condition Bw > -g/sigma^2.
    """

    kind: ModelKind
    z_min: float
    t_at_min: float
    margin: float
    admissible: bool
    note: str


def _check_t(params: ModelParams, t: float) -> None:
    if not (-1e-12 <= t <= params.T * (1.0 + 1e-12)):
        raise AdmissibilityError(f"t = {t} outside [0, {params.T}]")


def control_model1(
    params: ModelParams, coeffs: Model1Coeffs, t: float, q: float
) -> PolicyEval:
    _check_t(params, t)
    row = coeffs.table.interpolate(min(max(t, 0.0), params.T))
    names = coeffs.table.names
    D, E = row[names.index("D")], row[names.index("E")]
    p = params
    u = (2.0 * q * (D - p.lam * p.a**2) + 2.0 * p.a * p.s0 * p.lam + E) / p.kappa
    z = p.sigma**2 / p.g * D
    if z <= -1.0:
        raise AdmissibilityError(f"z = {z} <= -1 at t = {t}")
    return PolicyEval(t=t, q=q, s=None, u=u, z=z, s_tilde=p.s0 - p.a * q)


def control_model2(
    params: ModelParams, coeffs: Model2Coeffs, t: float, q: float, s: float
) -> PolicyEval:
    _check_t(params, t)
    row = coeffs.table.interpolate(min(max(t, 0.0), params.T))
    names = coeffs.table.names
    A, B, C, D = (row[names.index(n)] for n in "ABCD")
    p = params
    u = ((2.0 * p.lam * p.a + C) * s + 2.0 * (A - p.lam * p.a**2) * q + D) / p.kappa
    z = p.sigma**2 / p.g * B
    if z <= -1.0:
        raise AdmissibilityError(f"z = {z} <= -1 at t = {t}")
    return PolicyEval(t=t, q=q, s=s, u=u, z=z, s_tilde=s - p.a * q)


def control_model3(
    params: ModelParams, coeffs: Model3Coeffs, t: float, q: float, s: float
) -> PolicyEval:
    _check_t(params, t)
    if not coeffs.equilibrium_valid:
        raise AdmissibilityError(
            f"equilibrium condition Bw > -g/sigma^2 fails (margin {coeffs.bw_margin:.3g})"
        )
    row = coeffs.table.interpolate(min(max(t, 0.0), params.T))
    names = coeffs.table.names
    Av = row[names.index("Av")]
    Cv = row[names.index("Cv")]
    Dv = row[names.index("Dv")]
    Bw = row[names.index("Bw")]
    p = params
    u = (
        Cv * s + 2.0 * Av * q + Dv + 2.0 * p.lam * p.a * (s - p.a * q)
    ) / p.kappa
    z = p.sigma**2 / p.g * Bw
    if z <= -1.0:
        raise AdmissibilityError(f"z = {z} <= -1 at t = {t}")
    return PolicyEval(t=t, q=q, s=s, u=u, z=z, s_tilde=s - p.a * q)


def control(params: ModelParams, coeffs, t: float, q: float, s: float | None = None):
    if params.kind is ModelKind.MODEL1:
        return control_model1(params, coeffs, t, q)
    if s is None:
        raise AdmissibilityError("models 2-3 need the pre-impact price s")
    if params.kind is ModelKind.MODEL2:
        return control_model2(params, coeffs, t, q, s)
    return control_model3(params, coeffs, t, q, s)


def z_profile(params: ModelParams, coeffs) -> np.ndarray:
    """Volatility control on the coefficient grid (deterministic in t)."""
    p = params
    if params.kind is ModelKind.MODEL1:
        col = coeffs.table.col("D")
    elif params.kind is ModelKind.MODEL2:
        col = coeffs.table.col("B")
    else:
        col = coeffs.table.col("Bw")
    return p.sigma**2 / p.g * col


def check_admissible(params: ModelParams, coeffs) -> GridAdmissibility:
    """Report-only grid check of z > -1 for the relevant model.

    Evaluated on the coefficient grid; the margin lets callers judge how
    close the control comes to the floor between grid points.
    """
    z = z_profile(params, coeffs)
    k = int(np.argmin(z))
    z_min = float(z[k])
    margin = z_min + 1.0
    if params.kind is ModelKind.MODEL2:
        note = "volatility control is nonnegative by construction"
    elif params.kind is ModelKind.MODEL3:
        note = "margin equivalently expresses Bw > -g/sigma^2"
    else:
        note = "equivalent to D > -g/sigma^2 on the grid"
    return GridAdmissibility(
        kind=params.kind,
        z_min=z_min,
        t_at_min=float(coeffs.table.grid.points[k]),
        margin=margin,
        admissible=margin > 0.0,
        note=note,
    )
