"""Seeded Monte-Carlo simulation of the closed-loop dynamics.

Euler-Maruyama on the coefficient grid with feedback controls frozen at the
left endpoint of each step, under the physical measure P or the pricing
measure Q (measure changes are implemented by changing the drift). Model 1
additionally has an exact simulator that advances the production rate by the
closed-form solution of its linear SDE.

Randomness: one counter-based generator stream per path, keyed by
(seed, path index) through Philox. Paths are therefore reproducible
independently of any batching or parallel scheduling, and common random
numbers across parameter sweeps come for free by fixing the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .coeffs import Model1Coeffs, Model2Coeffs, Model3Coeffs, price_tail
from .ode import TimeGrid
from .params import ModelKind, ModelParams
from .policy import AdmissibilityError, check_admissible


class Measure(Enum):
    P = "P"
    Q = "Q"


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    n_steps: int
    seed: int
    measure: Measure = Measure.P

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise SimError(f"n_paths must be a positive integer, got {self.n_paths}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise SimError(f"n_steps must be a positive integer, got {self.n_steps}")
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise SimError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "n_paths", int(self.n_paths))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class MeanCI:
    """Monte-Carlo mean with standard error and 95% interval."""

    mean: float
    std_error: float
    n: int
    ci95_low: float
    ci95_high: float

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "MeanCI":
        x = np.asarray(x, dtype=float)
        n = x.size
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, se, n, mean - 1.96 * se, mean + 1.96 * se)


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """The stream for one path: Philox keyed by (seed, path index)."""
    return np.random.Generator(np.random.Philox(key=seed + (path_index << 64)))


# --- per-path kernels --------------------------------------------------------
#
# Each kernel advances one path on the full grid, draws its noise from the
# path's own generator, stores the trajectory when asked, and accumulates the
# left-point running integrals plus the grid aggregates. Outputs per path:
# terminal state, payoff, and the integral pack.


@njit(cache=True)
def _path_m1(rg, n_steps, h, sqrt_h, u0, uq, se, tail,
             s0, a, lam, kappa, q_init, drift_on,
             u_factor, u_add,
             store, path_q, path_u,
             aggr, q_sum, q_sq, h_sum, h_sq, dx_sum, dx_sq):
    q = q_init
    profit = 0.0
    ucost = 0.0
    hedge = 0.0
    repl = 0.0
    for k in range(n_steps):
        st = s0 - a * q
        u = (u0[k] + uq[k] * q) * u_factor + u_add[k]
        delta = 2.0 * a * (a * q - s0)
        if store:
            path_q[k] = q
            path_u[k] = u
        if aggr:
            hk = st * st + tail[k]
            q_sum[k] += q
            q_sq[k] += q * q
            h_sum[k] += hk
            h_sq[k] += hk * hk
        profit += q * st * h
        ucost += 0.5 * kappa * u * u * h
        hedge += lam * delta * u * h
        z = rg.standard_normal()
        q_new = q + se[k] * sqrt_h * z
        if drift_on:
            q_new += u * h
        repl += delta * (q_new - q)
        if aggr:
            dx = q_new - q
            dx_sum[k] += dx
            dx_sq[k] += dx * dx
        q = q_new
    st = s0 - a * q
    u = (u0[n_steps] + uq[n_steps] * q) * u_factor + u_add[n_steps]
    if store:
        path_q[n_steps] = q
        path_u[n_steps] = u
    if aggr:
        hk = st * st
        q_sum[n_steps] += q
        q_sq[n_steps] += q * q
        h_sum[n_steps] += hk
        h_sq[n_steps] += hk * hk
    payoff = st * st
    return q, payoff, profit, ucost, hedge, repl


@njit(cache=True)
def _path_m1_exact(rg, n_steps, h, m_fac, b_det, sd, u0, uq, tail,
                   s0, a, lam, kappa, q_init,
                   store, path_q, path_u,
                   aggr, q_sum, q_sq, h_sum, h_sq, dx_sum, dx_sq):
    q = q_init
    profit = 0.0
    ucost = 0.0
    hedge = 0.0
    repl = 0.0
    for k in range(n_steps):
        st = s0 - a * q
        u = u0[k] + uq[k] * q
        delta = 2.0 * a * (a * q - s0)
        if store:
            path_q[k] = q
            path_u[k] = u
        if aggr:
            hk = st * st + tail[k]
            q_sum[k] += q
            q_sq[k] += q * q
            h_sum[k] += hk
            h_sq[k] += hk * hk
        profit += q * st * h
        ucost += 0.5 * kappa * u * u * h
        hedge += lam * delta * u * h
        z = rg.standard_normal()
        q_new = m_fac[k] * q + b_det[k] + sd[k] * z
        repl += delta * (q_new - q)
        if aggr:
            dx = q_new - q
            dx_sum[k] += dx
            dx_sq[k] += dx * dx
        q = q_new
    st = s0 - a * q
    u = u0[n_steps] + uq[n_steps] * q
    if store:
        path_q[n_steps] = q
        path_u[n_steps] = u
    if aggr:
        hk = st * st
        q_sum[n_steps] += q
        q_sq[n_steps] += q * q
        h_sum[n_steps] += hk
        h_sq[n_steps] += hk * hk
    payoff = st * st
    return q, payoff, profit, ucost, hedge, repl


@njit(cache=True)
def _path_m23(rg, n_steps, h, sqrt_h, u0, uq, us, se, tail,
              mu, a, lam, kappa, q_init, s_init, p_measure,
              u_factor, u_add,
              store, path_q, path_s, path_u,
              aggr, q_sum, q_sq, s_sum, s_sq, h_sum, h_sq, dx_sum, dx_sq):
    q = q_init
    S = s_init
    profit = 0.0
    ucost = 0.0
    hedge = 0.0
    repl = 0.0
    for k in range(n_steps):
        st = S - a * q
        u = (u0[k] + uq[k] * q + us[k] * S) * u_factor + u_add[k]
        delta = 2.0 * st
        if store:
            path_q[k] = q
            path_s[k] = S
            path_u[k] = u
        if aggr:
            hk = st * st + tail[k]
            q_sum[k] += q
            q_sq[k] += q * q
            s_sum[k] += S
            s_sq[k] += S * S
            h_sum[k] += hk
            h_sq[k] += hk * hk
        profit += q * st * h
        ucost += 0.5 * kappa * u * u * h
        hedge += lam * delta * (mu - a * u) * h
        z = rg.standard_normal()
        q_new = q + u * h
        if p_measure:
            S_new = S + mu * h + se[k] * sqrt_h * z
        else:
            # the impacted price is the Q-martingale; reconstruct S from it
            st_q = st + se[k] * sqrt_h * z
            S_new = st_q + a * q_new
        st_new = S_new - a * q_new
        repl += delta * (st_new - st)
        if aggr:
            dx = S_new - S if p_measure else st_new - st
            dx_sum[k] += dx
            dx_sq[k] += dx * dx
        q = q_new
        S = S_new
    st = S - a * q
    u = (u0[n_steps] + uq[n_steps] * q + us[n_steps] * S) * u_factor + u_add[n_steps]
    if store:
        path_q[n_steps] = q
        path_s[n_steps] = S
        path_u[n_steps] = u
    if aggr:
        hk = st * st
        q_sum[n_steps] += q
        q_sq[n_steps] += q * q
        s_sum[n_steps] += S
        s_sq[n_steps] += S * S
        h_sum[n_steps] += hk
        h_sq[n_steps] += hk * hk
    payoff = st * st
    return q, S, payoff, profit, ucost, hedge, repl


# --- ensemble ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    params: ModelParams
    config: SimConfig
    t: np.ndarray                  # grid points, (n_steps + 1,)
    z: np.ndarray                  # volatility control actually played, (n+1,)
    sigma_eff: np.ndarray          # sigma * sqrt(1 + z), (n+1,)
    tail: np.ndarray               # price tail integral, (n+1,)
    h0: float
    # stored trajectories, shape (n_stored, n+1)
    stored_q: np.ndarray
    stored_S: np.ndarray | None
    stored_u: np.ndarray
    # terminal cross-sections, shape (n_paths,)
    q_T: np.ndarray
    S_T: np.ndarray | None
    payoff: np.ndarray
    # per-path running integrals (left-point rule)
    profit: np.ndarray
    u_cost: np.ndarray
    hedge_term: np.ndarray
    replication_residual: np.ndarray
    z_cost: float                  # deterministic: z depends on t only
    # grid aggregates (None when not accumulated)
    mean_q: np.ndarray | None
    se_q: np.ndarray | None
    mean_S: np.ndarray | None
    se_S: np.ndarray | None
    mean_h: np.ndarray | None
    se_h: np.ndarray | None
    increment_var: np.ndarray | None  # per-step variance of the diffusion state

    @property
    def n_stored(self) -> int:
        return self.stored_q.shape[0]

    @property
    def stored_z(self) -> np.ndarray:
        return np.broadcast_to(self.z, (self.n_stored, self.z.size))

    @property
    def stored_s_tilde(self) -> np.ndarray:
        if self.params.kind is ModelKind.MODEL1:
            return self.params.s0 - self.params.a * self.stored_q
        return self.stored_S - self.params.a * self.stored_q

    @property
    def stored_h(self) -> np.ndarray:
        return self.stored_s_tilde**2 + self.tail

    @property
    def stored_delta(self) -> np.ndarray:
        if self.params.kind is ModelKind.MODEL1:
            return 2.0 * self.params.a * (self.params.a * self.stored_q - self.params.s0)
        return 2.0 * self.stored_s_tilde

    def producer_objective(self) -> np.ndarray:
        obj = self.profit - self.u_cost - self.hedge_term
        if self.params.kind is not ModelKind.MODEL3:
            obj = obj - self.z_cost
        return obj

    def trader_objective(self) -> np.ndarray:
        if self.params.kind is not ModelKind.MODEL3:
            raise SimError("trader objective only exists in model 3")
        return self.hedge_term - self.z_cost


def _mean_se(total: np.ndarray, total_sq: np.ndarray, n: int):
    mean = total / n
    if n > 1:
        var = np.maximum(total_sq - n * mean**2, 0.0) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    return mean, se


def _policy_arrays(params: ModelParams, coeffs, sim_grid_points: np.ndarray,
                   interpolate: bool):
    """Sample the control coefficients and the price tail on the sim grid."""
    p = params
    table = coeffs.table
    tpts = table.grid.points
    same = sim_grid_points.size == tpts.size
    if not same and not interpolate:
        raise SimError(
            f"n_steps {sim_grid_points.size - 1} does not match the coefficient "
            f"grid ({tpts.size - 1}); pass interpolate=True to resample"
        )

    def sample(col: np.ndarray) -> np.ndarray:
        if same:
            return col.copy()
        return np.interp(sim_grid_points, tpts, col)

    tail = sample(price_tail(coeffs))
    if p.kind is ModelKind.MODEL1:
        D = sample(table.col("D"))
        E = sample(table.col("E"))
        u0 = (2.0 * p.a * p.s0 * p.lam + E) / p.kappa
        uq = 2.0 * (D - p.lam * p.a**2) / p.kappa
        us = np.zeros_like(u0)
        z = p.sigma**2 / p.g * D
    elif p.kind is ModelKind.MODEL2:
        A = sample(table.col("A"))
        B = sample(table.col("B"))
        C = sample(table.col("C"))
        Dc = sample(table.col("D"))
        u0 = Dc / p.kappa
        uq = 2.0 * (A - p.lam * p.a**2) / p.kappa
        us = (2.0 * p.lam * p.a + C) / p.kappa
        z = p.sigma**2 / p.g * B
    else:
        Av = sample(table.col("Av"))
        Cv = sample(table.col("Cv"))
        Dv = sample(table.col("Dv"))
        Bw = sample(table.col("Bw"))
        u0 = Dv / p.kappa
        uq = (2.0 * Av - 2.0 * p.lam * p.a**2) / p.kappa
        us = (Cv + 2.0 * p.lam * p.a) / p.kappa
        z = p.sigma**2 / p.g * Bw
    return u0, uq, us, z, tail


def _gate(params: ModelParams, coeffs, z_played: np.ndarray) -> None:
    rep = check_admissible(params, coeffs)
    if not rep.admissible:
        raise AdmissibilityError(
            f"inadmissible coefficient set: min z = {rep.z_min:.6g} at "
            f"t = {rep.t_at_min:.6g}"
        )
    if params.kind is ModelKind.MODEL3 and not coeffs.equilibrium_valid:
        raise AdmissibilityError(
            f"equilibrium condition Bw > -g/sigma^2 fails (margin {coeffs.bw_margin:.3g})"
        )
    if z_played.min() <= -1.0:
        raise AdmissibilityError(
            f"perturbed volatility control hits the floor: min z = {z_played.min():.6g}"
        )


def simulate(
    params: ModelParams,
    coeffs,
    config: SimConfig,
    *,
    store_paths: int = 8,
    aggregates: bool = True,
    u_shift: float | np.ndarray = 0.0,
    u_factor: float = 1.0,
    z_shift: float = 0.0,
    interpolate: bool = False,
) -> PathEnsemble:
    """Simulate the closed loop under the configured measure.

    ``u_shift`` (a scalar or a deterministic time profile on the grid),
    ``u_factor`` and ``z_shift`` perturb the played controls away from the
    feedback optimum; they must keep z > -1 pathwise, which is checked up
    front since z is deterministic.
    """
    p = params
    _expect_kind(p, coeffs)
    n = config.n_steps
    pts = np.linspace(0.0, p.T, n + 1)
    u0, uq, us, z_base, tail = _policy_arrays(p, coeffs, pts, interpolate)

    z = z_base + z_shift
    _gate(p, coeffs, z)
    u_add = np.broadcast_to(np.asarray(u_shift, dtype=float), (n + 1,)).copy()

    h = p.T / n
    sqrt_h = math.sqrt(h)
    se = p.sigma * np.sqrt(1.0 + z)
    z_cost = float(0.5 * p.g * np.sum(z[:-1] ** 2) * h)
    n_store = min(store_paths, config.n_paths)
    drift_on = config.measure is Measure.P

    stored_q = np.zeros((n_store, n + 1))
    stored_u = np.zeros((n_store, n + 1))
    dummy = np.zeros(0)
    agg = [np.zeros(n + 1) for _ in range(6)] if aggregates else [dummy] * 6
    q_sum, q_sq, s_sum, s_sq, h_sum, h_sq = agg
    dx_sum = np.zeros(n) if aggregates else dummy
    dx_sq = np.zeros(n) if aggregates else dummy

    if p.kind is ModelKind.MODEL1:
        out = np.empty((config.n_paths, 6))
        stored_S = None
        for i in range(config.n_paths):
            rg = path_rng(config.seed, i)
            store = i < n_store
            out[i] = _path_m1(
                rg, n, h, sqrt_h, u0, uq, se, tail,
                p.s0, p.a, p.lam, p.kappa, p.q0, drift_on,
                u_factor, u_add,
                store, stored_q[i] if store else dummy,
                stored_u[i] if store else dummy,
                aggregates, q_sum, q_sq, h_sum, h_sq, dx_sum, dx_sq,
            )
        q_T, payoff = out[:, 0], out[:, 1]
        S_T = None
        profit, ucost, hedge, repl = out[:, 2], out[:, 3], out[:, 4], out[:, 5]
        h0 = float((p.s0 - p.a * p.q0) ** 2 + tail[0])
    else:
        out = np.empty((config.n_paths, 7))
        stored_S = np.zeros((n_store, n + 1))
        for i in range(config.n_paths):
            rg = path_rng(config.seed, i)
            store = i < n_store
            out[i] = _path_m23(
                rg, n, h, sqrt_h, u0, uq, us, se, tail,
                p.mu, p.a, p.lam, p.kappa, p.q0, p.s0, drift_on,
                u_factor, u_add,
                store, stored_q[i] if store else dummy,
                stored_S[i] if store else dummy,
                stored_u[i] if store else dummy,
                aggregates, q_sum, q_sq, s_sum, s_sq, h_sum, h_sq, dx_sum, dx_sq,
            )
        q_T, S_T, payoff = out[:, 0], out[:, 1], out[:, 2]
        profit, ucost, hedge, repl = out[:, 3], out[:, 4], out[:, 5], out[:, 6]
        h0 = float((p.s0 - p.a * p.q0) ** 2 + tail[0])

    # replication residual: (h_T - h_0) - sum delta * (underlying increment)
    repl_resid = (payoff - h0) - repl

    if aggregates:
        npaths = config.n_paths
        mean_q, se_q = _mean_se(q_sum, q_sq, npaths)
        mean_h, se_h = _mean_se(h_sum, h_sq, npaths)
        if p.kind is ModelKind.MODEL1:
            mean_S = se_S = None
        else:
            mean_S, se_S = _mean_se(s_sum, s_sq, npaths)
        if npaths > 1:
            inc_var = np.maximum(dx_sq - dx_sum**2 / npaths, 0.0) / (npaths - 1)
        else:
            inc_var = np.zeros(n)
    else:
        mean_q = se_q = mean_S = se_S = mean_h = se_h = inc_var = None

    return PathEnsemble(
        params=p, config=config, t=pts, z=z, sigma_eff=se, tail=tail, h0=h0,
        stored_q=stored_q, stored_S=stored_S, stored_u=stored_u,
        q_T=q_T, S_T=S_T, payoff=payoff,
        profit=profit, u_cost=ucost, hedge_term=hedge,
        replication_residual=repl_resid, z_cost=z_cost,
        mean_q=mean_q, se_q=se_q, mean_S=mean_S, se_S=se_S,
        mean_h=mean_h, se_h=se_h, increment_var=inc_var,
    )


def exact_q_model1(
    params: ModelParams,
    coeffs: Model1Coeffs,
    config: SimConfig,
    *,
    store_paths: int = 8,
    aggregates: bool = True,
    interpolate: bool = False,
) -> PathEnsemble:
    """Exact simulation of the model-1 production rate at the grid times.

    The state solves a linear SDE; each step advances by the closed-form
    solution (deterministic part by trapezoid quadrature, noise by a Gaussian
    increment whose variance comes from the Ito isometry). Reported running
    integrals still use the left-point rule on grid values.
    """
    p = params
    if p.kind is not ModelKind.MODEL1 or not isinstance(coeffs, Model1Coeffs):
        raise SimError("exact simulation is defined for model 1 only")
    n = config.n_steps
    pts = np.linspace(0.0, p.T, n + 1)
    _, _, _, z, tail = _policy_arrays(p, coeffs, pts, interpolate)
    _gate(p, coeffs, z)

    h = p.T / n
    se = p.sigma * np.sqrt(1.0 + z)
    z_cost = float(0.5 * p.g * np.sum(z[:-1] ** 2) * h)

    # Per-step Simpson quadrature for the stepping coefficients. The
    # quadratic coefficient has a closed form (exact at midpoints) and the
    # linear one is re-solved on a doubled grid, so the deterministic part
    # carries integrator accuracy regardless of the passed table resolution;
    # the passed table still supplies the played z profile and price tail.
    from .coeffs import model1_coeffs, model1_D_closed

    mid = 0.5 * (pts[:-1] + pts[1:])
    D_mid = model1_D_closed(p, mid)
    uq_mid = 2.0 * (D_mid - p.lam * p.a**2) / p.kappa
    fine = model1_coeffs(p, TimeGrid(T=p.T, n_steps=2 * n),
                         require_horizon=False)
    drift_const = 2.0 * p.a * p.s0 * p.lam
    u0 = (drift_const + fine.table.col("E")[0::2]) / p.kappa
    uq = 2.0 * (model1_D_closed(p, pts) - p.lam * p.a**2) / p.kappa
    u0_mid = (drift_const + fine.table.col("E")[1::2]) / p.kappa
    se2_mid = p.sigma**2 * (1.0 + p.sigma**2 / p.g * D_mid)
    if config.measure is Measure.P:
        # q' = uq q + u0 with uq = 2(D - lam a^2)/kappa, u0 = (2 a s0 lam + E)/kappa
        dcum = (h / 6.0) * (uq[:-1] + 4.0 * uq_mid + uq[1:])
        half = 0.25 * h * (uq_mid + uq[1:])       # integral over [mid, k+1]
        m_fac = np.exp(dcum)
        e_half = np.exp(half)
        b_det = (h / 6.0) * (m_fac * u0[:-1] + 4.0 * e_half * u0_mid + u0[1:])
        var = (h / 6.0) * (np.exp(2.0 * dcum) * se[:-1] ** 2
                           + 4.0 * np.exp(2.0 * half) * se2_mid
                           + se[1:] ** 2)
    else:
        m_fac = np.ones(n)
        b_det = np.zeros(n)
        var = (h / 6.0) * (se[:-1] ** 2 + 4.0 * se2_mid + se[1:] ** 2)
    sd = np.sqrt(var)

    n_store = min(store_paths, config.n_paths)
    stored_q = np.zeros((n_store, n + 1))
    stored_u = np.zeros((n_store, n + 1))
    dummy = np.zeros(0)
    agg = [np.zeros(n + 1) for _ in range(4)] if aggregates else [dummy] * 4
    q_sum, q_sq, h_sum, h_sq = agg
    dx_sum = np.zeros(n) if aggregates else dummy
    dx_sq = np.zeros(n) if aggregates else dummy

    out = np.empty((config.n_paths, 6))
    for i in range(config.n_paths):
        rg = path_rng(config.seed, i)
        store = i < n_store
        out[i] = _path_m1_exact(
            rg, n, h, m_fac, b_det, sd, u0, uq, tail,
            p.s0, p.a, p.lam, p.kappa, p.q0,
            store, stored_q[i] if store else dummy,
            stored_u[i] if store else dummy,
            aggregates, q_sum, q_sq, h_sum, h_sq, dx_sum, dx_sq,
        )
    q_T, payoff = out[:, 0], out[:, 1]
    profit, ucost, hedge, repl = out[:, 2], out[:, 3], out[:, 4], out[:, 5]
    h0 = float((p.s0 - p.a * p.q0) ** 2 + tail[0])
    repl_resid = (payoff - h0) - repl

    if aggregates:
        npaths = config.n_paths
        mean_q, se_q = _mean_se(q_sum, q_sq, npaths)
        mean_h, se_h = _mean_se(h_sum, h_sq, npaths)
        if npaths > 1:
            inc_var = np.maximum(dx_sq - dx_sum**2 / npaths, 0.0) / (npaths - 1)
        else:
            inc_var = np.zeros(n)
    else:
        mean_q = se_q = mean_h = se_h = inc_var = None

    return PathEnsemble(
        params=p, config=config, t=pts, z=z, sigma_eff=se, tail=tail, h0=h0,
        stored_q=stored_q, stored_S=None, stored_u=stored_u,
        q_T=q_T, S_T=None, payoff=payoff,
        profit=profit, u_cost=ucost, hedge_term=hedge,
        replication_residual=repl_resid, z_cost=z_cost,
        mean_q=mean_q, se_q=se_q, mean_S=None, se_S=None,
        mean_h=mean_h, se_h=se_h, increment_var=inc_var,
    )


FUNCTIONALS = (
    "one",
    "payoff",
    "terminal_q",
    "terminal_q_sq",
    "producer_objective",
    "trader_objective",
)


def estimate(functional: str, ensemble: PathEnsemble) -> MeanCI:
    """Sample mean and standard error of a per-path functional."""
    if functional == "one":
        return MeanCI.from_samples(np.ones(ensemble.config.n_paths))
    if functional == "payoff":
        return MeanCI.from_samples(ensemble.payoff)
    if functional == "terminal_q":
        return MeanCI.from_samples(ensemble.q_T)
    if functional == "terminal_q_sq":
        return MeanCI.from_samples(ensemble.q_T**2)
    if functional == "producer_objective":
        return MeanCI.from_samples(ensemble.producer_objective())
    if functional == "trader_objective":
        return MeanCI.from_samples(ensemble.trader_objective())
    raise SimError(f"unknown functional {functional!r}; known: {FUNCTIONALS}")


def paths_csv_text(ensemble: PathEnsemble, max_paths: int | None = None) -> str:
    """Stored paths as CSV rows ``path_id,t,q,S,u,z,s_tilde,h,delta``.

    Model 1 has no price state; its S column reports the constant
    pre-impact level s0.
    """
    n_emit = ensemble.n_stored if max_paths is None else min(max_paths, ensemble.n_stored)
    p = ensemble.params
    st = ensemble.stored_s_tilde
    hs = ensemble.stored_h
    deltas = ensemble.stored_delta
    lines = ["path_id,t,q,S,u,z,s_tilde,h,delta"]
    for i in range(n_emit):
        for k, t in enumerate(ensemble.t):
            S = p.s0 if ensemble.stored_S is None else ensemble.stored_S[i, k]
            lines.append(
                f"{i},{t:.17g},{ensemble.stored_q[i, k]:.17g},{S:.17g},"
                f"{ensemble.stored_u[i, k]:.17g},{ensemble.z[k]:.17g},"
                f"{st[i, k]:.17g},{hs[i, k]:.17g},{deltas[i, k]:.17g}"
            )
    return "\n".join(lines) + "\n"


def _expect_kind(params: ModelParams, coeffs) -> None:
    expected = {
        ModelKind.MODEL1: Model1Coeffs,
        ModelKind.MODEL2: Model2Coeffs,
        ModelKind.MODEL3: Model3Coeffs,
    }[params.kind]
    if not isinstance(coeffs, expected):
        raise SimError(
            f"coefficient set {type(coeffs).__name__} does not match {params.kind}"
        )
