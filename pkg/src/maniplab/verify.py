"""Independent optimality and pricing oracles.

Three checks that do not trust the coefficient pipeline:

* ``hjb_residual`` plugs the quadratic ansatz into the dynamic-programming
  equation. The supremum side is evaluated from the raw equation (analytic
  state derivatives of the ansatz, first-order-condition controls) using the
  table under test; the time-derivative side uses the implemented ODE
  right-hand sides evaluated on a freshly rebuilt reference table. A typo in
  the ODE system or a corrupted table both surface as a large residual,
  while an honest table leaves integrator error only.
* ``perturbation_test`` simulates admissible deviations from the feedback
  optimum with common random numbers and checks the deviator's objective
  drops beyond sampling noise (unilaterally per player in model 3).
* ``cross_simulator_check`` plays the Euler and exact model-1 simulators
  against each other and against the deterministic mean dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coeffs import (
    Model1Coeffs,
    build_coeffs,
    model1_coeffs,
    model2_value_rhs,
    model3_value_rhs,
    _model1_linear_rhs,
)
from .ode import TimeGrid
from .params import ModelKind, ModelParams
from .simulate import (
    MeanCI,
    Measure,
    SimConfig,
    estimate,
    exact_q_model1,
    simulate,
)


@dataclass(frozen=True)
class ResidualReport:
    kind: ModelKind
    max_abs_residual: float
    worst_t: float
    worst_q: float
    worst_s: float | None
    n_points: int
    # model 3 carries one equation per player
    producer_residual: float | None = None
    trader_residual: float | None = None


def _rebuild_reference(params: ModelParams, grid: TimeGrid):
    if params.kind is ModelKind.MODEL1:
        return model1_coeffs(params, grid, require_horizon=False)
    return build_coeffs(params, grid)


def _grid_indices(table, t_values: np.ndarray) -> np.ndarray:
    pts = table.grid.points
    idx = np.rint(t_values / table.grid.h).astype(int)
    if np.any(np.abs(pts[idx] - t_values) > 1e-9 * max(table.grid.T, 1.0)):
        raise ValueError("t values must lie on the coefficient grid")
    return idx


def hjb_residual(
    params: ModelParams,
    coeffs,
    *,
    t_values=None,
    q_values=None,
    s_values=None,
) -> ResidualReport:
    """Max absolute dynamic-programming residual over a state grid.

    ``t_values`` must lie on the coefficient grid (default: five equally
    spaced times including 0 and T).
    """
    p = params
    table = coeffs.table
    if t_values is None:
        t_values = np.linspace(0.0, p.T, 5)
    t_values = np.asarray(t_values, dtype=float)
    if q_values is None:
        q_values = np.linspace(-5.0, 25.0, 11 if p.kind is ModelKind.MODEL1 else 5)
    q_values = np.asarray(q_values, dtype=float)
    if p.kind is not ModelKind.MODEL1:
        s_values = np.linspace(0.0, 20.0, 5) if s_values is None else np.asarray(s_values, dtype=float)

    ref = _rebuild_reference(p, table.grid)
    idx = _grid_indices(table, t_values)

    worst = (-1.0, 0.0, 0.0, None)
    prod_max = 0.0
    trad_max = 0.0
    n_points = 0

    for k, t in zip(idx, t_values):
        test_row = dict(zip(table.names, table.values[k]))
        ref_row = dict(zip(ref.table.names, ref.table.values[k]))
        if p.kind is ModelKind.MODEL1:
            vt = _m1_time_derivative(p, t, ref_row)
            for q in q_values:
                res = abs(vt(q) + _m1_raw_sup(p, q, test_row))
                n_points += 1
                if res > worst[0]:
                    worst = (res, t, q, None)
        elif p.kind is ModelKind.MODEL2:
            vt = _m2_time_derivative(p, ref_row)
            for q in q_values:
                for s in s_values:
                    res = abs(vt(q, s) + _m2_raw_sup(p, q, s, test_row))
                    n_points += 1
                    if res > worst[0]:
                        worst = (res, t, q, s)
        else:
            vt_v, vt_w = _m3_time_derivatives(p, t, ref_row)
            for q in q_values:
                for s in s_values:
                    res_v = abs(vt_v(q, s) + _m3_raw_sup_producer(p, q, s, test_row))
                    res_w = abs(vt_w(q, s) + _m3_raw_sup_trader(p, q, s, test_row))
                    prod_max = max(prod_max, res_v)
                    trad_max = max(trad_max, res_w)
                    res = max(res_v, res_w)
                    n_points += 1
                    if res > worst[0]:
                        worst = (res, t, q, s)

    return ResidualReport(
        kind=p.kind,
        max_abs_residual=worst[0],
        worst_t=worst[1],
        worst_q=worst[2],
        worst_s=worst[3],
        n_points=n_points,
        producer_residual=prod_max if p.kind is ModelKind.MODEL3 else None,
        trader_residual=trad_max if p.kind is ModelKind.MODEL3 else None,
    )


# time-derivative side: implemented ODE right-hand sides at reference values


def _m1_time_derivative(p: ModelParams, t: float, ref: dict):
    dD = p.a - (2.0 / p.kappa) * (ref["D"] - p.lam * p.a**2) ** 2
    dC, dE, dF = _model1_linear_rhs(p)(t, np.array([ref["C"], ref["E"], ref["F"]]))
    return lambda q: dD * q * q + dE * q + dF


def _m2_time_derivative(p: ModelParams, ref: dict):
    y = np.array([ref[n] for n in "ABCDEF"])
    dA, dB, dC, dD, dE, dF = model2_value_rhs(p)(0.0, y)
    return lambda q, s: dA * q * q + dB * s * s + dC * q * s + dD * q + dE * s + dF


def _m3_time_derivatives(p: ModelParams, t: float, ref: dict):
    order = ("Bv", "Cv", "Dv", "Ev", "Fv", "Aw", "Bw", "Cw", "Dw", "Ew", "Fw")
    y = np.array([ref[n] for n in order])
    d = dict(zip(order, model3_value_rhs(p)(t, y)))
    d["Av"] = p.a - (2.0 / p.kappa) * (ref["Av"] - p.lam * p.a**2) ** 2

    def vt_v(q, s):
        return (d["Av"] * q * q + d["Bv"] * s * s + d["Cv"] * q * s
                + d["Dv"] * q + d["Ev"] * s + d["Fv"])

    def vt_w(q, s):
        return (d["Aw"] * q * q + d["Bw"] * s * s + d["Cw"] * q * s
                + d["Dw"] * q + d["Ew"] * s + d["Fw"])

    return vt_v, vt_w


# supremum side: raw equation with first-order-condition controls at the
# table under test (interior optima; the z > -1 floor is not binding on the
# grids used here)


def _m1_raw_sup(p: ModelParams, q: float, row: dict) -> float:
    vq = 2.0 * row["D"] * q + row["E"]
    vqq = 2.0 * row["D"]
    phi_q = 2.0 * p.a**2 * q - 2.0 * p.a * p.s0
    u = (vq - p.lam * phi_q) / p.kappa
    z = p.sigma**2 * vqq / (2.0 * p.g)
    return (
        q * (p.s0 - p.a * q)
        - 0.5 * p.g * z * z
        - 0.5 * p.kappa * u * u
        - p.lam * phi_q * u
        + u * vq
        + 0.5 * p.sigma**2 * (1.0 + z) * vqq
    )


def _m2_raw_sup(p: ModelParams, q: float, s: float, row: dict) -> float:
    vq = 2.0 * row["A"] * q + row["C"] * s + row["D"]
    vs = 2.0 * row["B"] * s + row["C"] * q + row["E"]
    vss = 2.0 * row["B"]
    phi_s = 2.0 * (s - p.a * q)
    u = (p.a * p.lam * phi_s + vq) / p.kappa
    z = p.sigma**2 * vss / (2.0 * p.g)
    return (
        q * (s - p.a * q)
        - 0.5 * p.g * z * z
        - 0.5 * p.kappa * u * u
        - p.lam * phi_s * (p.mu - p.a * u)
        + vq * u
        + vs * p.mu
        + 0.5 * p.sigma**2 * (1.0 + z) * vss
    )


def _m3_controls(p: ModelParams, q: float, s: float, row: dict):
    vq = 2.0 * row["Av"] * q + row["Cv"] * s + row["Dv"]
    phi_s = 2.0 * (s - p.a * q)
    u = (vq + p.lam * p.a * phi_s) / p.kappa
    z = p.sigma**2 * row["Bw"] / p.g
    return u, z, phi_s


def _m3_raw_sup_producer(p: ModelParams, q: float, s: float, row: dict) -> float:
    u, z, phi_s = _m3_controls(p, q, s, row)
    vq = 2.0 * row["Av"] * q + row["Cv"] * s + row["Dv"]
    vs = 2.0 * row["Bv"] * s + row["Cv"] * q + row["Ev"]
    vss = 2.0 * row["Bv"]
    return (
        q * (s - p.a * q)
        - 0.5 * p.kappa * u * u
        - p.lam * phi_s * (p.mu - p.a * u)
        + vq * u
        + vs * p.mu
        + 0.5 * p.sigma**2 * (1.0 + z) * vss
    )


def _m3_raw_sup_trader(p: ModelParams, q: float, s: float, row: dict) -> float:
    u, _, phi_s = _m3_controls(p, q, s, row)
    wq = 2.0 * row["Aw"] * q + row["Cw"] * s + row["Dw"]
    ws = 2.0 * row["Bw"] * s + row["Cw"] * q + row["Ew"]
    wss = 2.0 * row["Bw"]
    z = p.sigma**2 * wss / (2.0 * p.g)
    return (
        -0.5 * p.g * z * z
        + p.lam * phi_s * (p.mu - p.a * u)
        + wq * u
        + ws * p.mu
        + 0.5 * p.sigma**2 * (1.0 + z) * wss
    )


# --- policy perturbation tests ------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """A deterministic deviation from the feedback optimum.

    ``add`` on channel u shifts by epsilon times the reference control
    magnitude; ``add`` on z shifts by epsilon directly (z is already a
    fraction); ``scale`` multiplies the feedback control by (1 + epsilon).
    """

    channel: str  # "u" | "z"
    mode: str     # "add" | "scale"
    epsilon: float

    def __post_init__(self):
        if self.channel not in ("u", "z"):
            raise ValueError(f"channel must be 'u' or 'z', got {self.channel!r}")
        if self.mode not in ("add", "scale"):
            raise ValueError(f"mode must be 'add' or 'scale', got {self.mode!r}")
        if self.channel == "z" and self.mode == "scale":
            raise ValueError("z perturbations are additive only")


@dataclass(frozen=True)
class PerturbationReport:
    perturbation: Perturbation
    objective: str          # which player's objective was measured
    u_reference: float      # magnitude used to scale additive u shifts
    diff: MeanCI            # perturbed minus optimal, paired per path
    verdict: str            # PASS (drop beyond 3 SE) / FAIL / INCONCLUSIVE


def control_magnitude(params: ModelParams, coeffs, n_steps: int = 2000) -> float:
    """Time-average |u| along the deterministic mean path (states are
    affine, so the mean path follows the noise-free recursion)."""
    from .simulate import _policy_arrays  # sampled on the same helper

    p = params
    pts = np.linspace(0.0, p.T, n_steps + 1)
    u0, uq, us, _, _ = _policy_arrays(p, coeffs, pts, True)
    h = p.T / n_steps
    q, S = p.q0, p.s0
    total = 0.0
    for k in range(n_steps):
        u = u0[k] + uq[k] * q + us[k] * S
        total += abs(u)
        q += u * h
        S += p.mu * h
    return total / n_steps


def perturbation_test(
    params: ModelParams,
    coeffs,
    pert: Perturbation,
    simconfig: SimConfig,
    *,
    base=None,
) -> PerturbationReport:
    """Paired comparison of the perturbed objective against the optimum.

    Common random numbers (same seed, per-path streams) make the paired
    difference exact at epsilon = 0 and sharp elsewhere. PASS requires the
    deviator's objective to drop beyond 3 standard errors of the paired
    difference; a confidence interval containing zero is INCONCLUSIVE.
    ``base`` lets callers reuse one unperturbed ensemble across a battery of
    deviations (it must come from the same coefficients and config).
    """
    if simconfig.measure is not Measure.P:
        raise ValueError("perturbation tests compare physical-measure objectives")
    p = params
    objective = "producer_objective"
    if p.kind is ModelKind.MODEL3 and pert.channel == "z":
        objective = "trader_objective"

    kwargs = {}
    u_ref = 0.0
    if pert.channel == "u":
        if pert.mode == "add":
            u_ref = control_magnitude(p, coeffs)
            kwargs["u_shift"] = pert.epsilon * u_ref
        else:
            kwargs["u_factor"] = 1.0 + pert.epsilon
    else:
        kwargs["z_shift"] = pert.epsilon

    if base is None:
        base = simulate(p, coeffs, simconfig, store_paths=0,
                        aggregates=False, interpolate=True)
    elif base.config != simconfig:
        raise ValueError("base ensemble config does not match simconfig")
    bumped = simulate(p, coeffs, simconfig, store_paths=0,
                      aggregates=False, interpolate=True, **kwargs)
    diff = MeanCI.from_samples(
        getattr(bumped, objective)() - getattr(base, objective)()
    )
    if diff.mean + 3.0 * diff.std_error < 0.0:
        verdict = "PASS"
    elif diff.mean - 3.0 * diff.std_error > 0.0:
        verdict = "FAIL"
    else:
        verdict = "INCONCLUSIVE"
    return PerturbationReport(pert, objective, u_ref, diff, verdict)


# --- cross-simulator agreement -------------------------------------------------


@dataclass(frozen=True)
class CrossSimReport:
    mean_euler: MeanCI
    mean_exact: MeanCI
    var_euler: float
    var_exact: float
    mean_gap_sigma: float       # |mean difference| in combined-SE units
    var_gap_sigma: float
    euler_path_gap_sigma: float  # MC mean path vs its discrete mean recursion
    exact_path_gap_sigma: float  # MC mean path vs the continuous mean ODE
    passed: bool


def _mean_ode_rk4(p: ModelParams, u0: np.ndarray, uq: np.ndarray, pts: np.ndarray):
    """Forward RK4 for m' = uq(t) m + u0(t) with linear interpolation of the
    sampled coefficients at half-steps."""
    n = pts.size - 1
    h = pts[1] - pts[0]
    m = np.empty(n + 1)
    m[0] = p.q0
    for k in range(n):
        uqh = 0.5 * (uq[k] + uq[k + 1])
        u0h = 0.5 * (u0[k] + u0[k + 1])
        y = m[k]
        k1 = uq[k] * y + u0[k]
        k2 = uqh * (y + 0.5 * h * k1) + u0h
        k3 = uqh * (y + 0.5 * h * k2) + u0h
        k4 = uq[k + 1] * (y + h * k3) + u0[k + 1]
        m[k + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return m


def cross_simulator_check(
    params: ModelParams,
    coeffs: Model1Coeffs,
    simconfig: SimConfig,
    *,
    tolerance_sigma: float = 3.0,
) -> CrossSimReport:
    """Mutual-oracle comparison of the two model-1 simulators.

    Terminal mean and variance are compared across independent seeds; the
    Euler mean path is compared to its own deterministic mean recursion
    (exact in expectation) and the exact-simulator mean path to the RK4
    solution of the continuous mean dynamics.
    """
    from .simulate import _policy_arrays

    p = params
    if p.kind is not ModelKind.MODEL1:
        raise ValueError("cross-simulator check is a model-1 oracle")
    euler = simulate(p, coeffs, simconfig, store_paths=0, interpolate=True)
    cfg2 = replace(simconfig, seed=(simconfig.seed + 1) % 2**64)
    exact = exact_q_model1(p, coeffs, cfg2, store_paths=0, interpolate=True)

    m_e = estimate("terminal_q", euler)
    m_x = estimate("terminal_q", exact)
    gap = abs(m_e.mean - m_x.mean)
    se = math.hypot(m_e.std_error, m_x.std_error)
    mean_gap_sigma = gap / se if se > 0 else (0.0 if gap == 0.0 else math.inf)

    n = simconfig.n_paths
    v_e = float(euler.q_T.var(ddof=1))
    v_x = float(exact.q_T.var(ddof=1))
    se_v = math.sqrt(2.0 / (n - 1)) * math.hypot(v_e, v_x) if n > 1 else 0.0
    var_gap_sigma = abs(v_e - v_x) / se_v if se_v > 0 else 0.0

    pts = euler.t
    u0, uq, _, _, _ = _policy_arrays(p, coeffs, pts, True)
    nsteps = simconfig.n_steps
    h = p.T / nsteps
    # discrete mean recursion matching the Euler scheme in expectation
    m_disc = np.empty(nsteps + 1)
    m_disc[0] = p.q0
    for k in range(nsteps):
        m_disc[k + 1] = m_disc[k] + (u0[k] + uq[k] * m_disc[k]) * h
    m_ode = _mean_ode_rk4(p, u0, uq, pts)

    checks = np.arange(0, nsteps + 1, max(1, nsteps // 10))
    with np.errstate(divide="ignore", invalid="ignore"):
        gap_e = np.abs(euler.mean_q[checks] - m_disc[checks])
        gap_x = np.abs(exact.mean_q[checks] - m_ode[checks])
        sig_e = np.where(euler.se_q[checks] > 0, gap_e / euler.se_q[checks],
                         np.where(gap_e == 0, 0.0, np.inf))
        sig_x = np.where(exact.se_q[checks] > 0, gap_x / exact.se_q[checks],
                         np.where(gap_x == 0, 0.0, np.inf))
    euler_path_gap = float(np.max(sig_e))
    exact_path_gap = float(np.max(sig_x))

    passed = all(
        g <= tolerance_sigma
        for g in (mean_gap_sigma, var_gap_sigma, euler_path_gap, exact_path_gap)
    )
    return CrossSimReport(
        mean_euler=m_e, mean_exact=m_x,
        var_euler=v_e, var_exact=v_x,
        mean_gap_sigma=mean_gap_sigma, var_gap_sigma=var_gap_sigma,
        euler_path_gap_sigma=euler_path_gap, exact_path_gap_sigma=exact_path_gap,
        passed=passed,
    )
