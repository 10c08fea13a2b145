"""Nonlinear impact via an effective-linear-cost approximation, and capacity.

The impact term (Q/n) D^n with D = I * rho_star * sum(tau_i |w_i|) is
approximated, for turnovers clustered around their mean tau_bar, by a
first-order expansion that folds into the per-stream linear costs:

    L_eff_i = L_i + Q * rho_star^n * I^(n-1) * tau_bar^(n-1) * tau_i.

The solve then reuses the linear-cost machinery, while the P&L report always
carries the full nonlinear term so the approximation error stays visible.
Because L_eff grows with the investment level I, there is a finite level
beyond which every alpha is inside its cost band, which makes the optimized
P&L peak at a finite capacity I*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .covariance import FactorModel, sample_covariance
from .errors import AllAlphasKilled, InputError, NoPositiveCapacity, UnboundedCapacity
from .model import Allocation, AlphaSet, CostSpec, PnlReport, evaluate_pnl
from .optimizer import SolveOptions, solve_linear_cost
from .turnover import TurnoverModel, linear_cost_vector, spectral_rho_star

# Premise of the expansion is a tight turnover distribution; warn past this.
DISPERSION_WARN_RATIO = 0.5


@dataclass(frozen=True)
class ImpactSpec:
    """Effective linear costs and the turnover statistics behind them.

    ``effective_costs`` is the headline vector
    L_i + q_tilde_prime * tau_bar^(n-1) * tau_i (always >= L_i); it feeds the
    finite-capacity test. ``solver_costs`` is the same expansion with the
    budget-constant dropped — the tau_i factor replaced by tau_i - tau_bar —
    which is what the weight solve consumes: on the unit absolute-weight
    budget the two differ by a constant, and only the centered form reduces
    exactly to the pure linear costs when all turnovers are equal (where the
    impact genuinely is a constant P&L shift). Entries pushed negative by
    heavy turnover dispersion are clamped to zero; the expansion premise is
    broken there anyway, which ``dispersion_warning`` flags.
    """

    q_tilde_prime: float
    tau_bar: float
    tau_tilde: np.ndarray
    effective_costs: np.ndarray
    solver_costs: np.ndarray
    dispersion_ratio: float
    dispersion_warning: bool


@dataclass(frozen=True)
class CapacityResult:
    """Finite capacity I* with the optimized-P&L curve sampled around it."""

    capacity: float
    pnl_at_capacity: float
    investment_grid: np.ndarray
    pnl_grid: np.ndarray
    bracket: tuple
    allocation: Allocation


def effective_linear_costs(cost_spec: CostSpec, turnovers, rho_star: float) -> ImpactSpec:
    """Fold the impact term into per-stream linear costs.

    Returns the effective costs L_eff_i together with tau_bar, the centered
    turnovers, and the dispersion ratio stdev(tau)/tau_bar that gauges how
    trustworthy the expansion is.
    """
    tau = np.asarray(turnovers, dtype=float)
    base = linear_cost_vector(cost_spec, tau, rho_star)
    tau_bar = float(np.mean(tau))
    tau_tilde = tau - tau_bar
    n_exp = cost_spec.impact_exponent
    q_tp = cost_spec.impact_coeff * rho_star**n_exp * cost_spec.investment ** (n_exp - 1.0)
    if cost_spec.impact_coeff > 0 and tau_bar > 0:
        slope = q_tp * tau_bar ** (n_exp - 1.0)
        effective = base + slope * tau
        solver = np.maximum(base + slope * tau_tilde, 0.0)
    else:
        effective = base.copy()
        solver = base.copy()
    spread = float(np.std(tau_tilde))
    ratio = spread / tau_bar if tau_bar > 0 else float("inf") if spread > 0 else 0.0
    return ImpactSpec(
        q_tilde_prime=q_tp,
        tau_bar=tau_bar,
        tau_tilde=tau_tilde,
        effective_costs=effective,
        solver_costs=solver,
        dispersion_ratio=ratio,
        dispersion_warning=ratio > DISPERSION_WARN_RATIO,
    )


def _resolve_rho(alpha_set: AlphaSet, cost_spec: CostSpec, rho_model):
    if rho_model is not None:
        return rho_model
    if cost_spec.rho_star_override is not None:
        return TurnoverModel.override(cost_spec.rho_star_override, alpha_set.num_streams)
    return spectral_rho_star(sample_covariance(alpha_set.history).corr)


def _approx_impact_cost(spec: ImpactSpec, cost_spec: CostSpec, weights) -> float:
    """Expanded impact cost: (Q~/n) tau_bar^n + Q~ tau_bar^(n-1) sum(tau~ |w|)."""
    n_exp = cost_spec.impact_exponent
    q_tilde = spec.q_tilde_prime * cost_spec.investment
    if cost_spec.impact_coeff == 0:
        return 0.0
    return q_tilde * spec.tau_bar ** (n_exp - 1.0) * (
        spec.tau_bar / n_exp + float(np.sum(spec.tau_tilde * np.abs(weights)))
    )


def solve_with_impact(
    alpha_set: AlphaSet,
    factor_model: FactorModel,
    cost_spec: CostSpec,
    options: Optional[SolveOptions] = None,
    rho_model: Optional[TurnoverModel] = None,
):
    """Optimize under linear costs plus impact via the effective-cost device.

    Returns ``(allocation, report)``. The allocation solves the expanded
    problem (impact folded into the linear costs, budget-constant dropped);
    the report's ``impact_cost_total`` is the exact nonlinear cost at those
    weights and ``impact_cost_approx`` the expanded one, so their gap
    quantifies the approximation.

    Raises
    ------
    AllAlphasKilled
        When every effective cost reaches its alpha; at such investment
        levels the P&L cannot be positive.
    """
    rho = _resolve_rho(alpha_set, cost_spec, rho_model)
    spec = effective_linear_costs(cost_spec, alpha_set.turnovers, rho.rho_star)
    if np.all(spec.effective_costs >= np.abs(alpha_set.alphas)):
        raise AllAlphasKilled(
            "every effective cost reaches its alpha; P&L cannot be positive at this level"
        )
    allocation = solve_linear_cost(alpha_set, factor_model, spec.solver_costs,
                                   options, rho)
    report = evaluate_pnl(
        alpha_set, allocation.weights, cost_spec, rho.rho_star, factor_model=factor_model
    )
    report = replace(
        report, impact_cost_approx=_approx_impact_cost(spec, cost_spec, allocation.weights)
    )
    return allocation, report


def find_capacity(
    alpha_set: AlphaSet,
    factor_model: FactorModel,
    cost_spec: CostSpec,
    options: Optional[SolveOptions] = None,
    rho_model: Optional[TurnoverModel] = None,
    bracket: tuple = (1.0, 1e12),
    grid_points: int = 49,
    relative_width: float = 1e-6,
) -> CapacityResult:
    """Locate the investment level I* that maximizes optimized P&L.

    Samples P_opt(I) on a log-spaced grid over ``bracket`` (the investment in
    ``cost_spec`` is ignored), then refines the best bracket by golden-section
    on log(I) down to ``relative_width``. Golden-section needs no derivatives,
    which matters because P_opt is only piecewise smooth: the active set
    changes with I.

    Raises
    ------
    UnboundedCapacity
        If ``impact_coeff`` is zero: with linear costs only, P&L scales
        linearly in I and no finite maximizer exists.
    NoPositiveCapacity
        If P_opt(I) <= 0 everywhere on the grid.
    """
    if cost_spec.impact_coeff == 0:
        raise UnboundedCapacity(
            "impact_coeff is zero: optimized P&L grows linearly with investment"
        )
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (lo > 0 and hi > lo):
        raise InputError(f"invalid capacity bracket {bracket}")

    rho = _resolve_rho(alpha_set, cost_spec, rho_model)
    cache: dict = {}

    def pnl_opt(inv: float):
        if inv in cache:
            return cache[inv]
        spec_i = replace(cost_spec, investment=inv)
        try:
            alloc, report = solve_with_impact(alpha_set, factor_model, spec_i, options, rho)
            out = (report.pnl, alloc)
        except AllAlphasKilled:
            out = (-math.inf, None)
        cache[inv] = out
        return out

    grid = np.geomspace(lo, hi, int(grid_points))
    pnl_grid = np.array([pnl_opt(i)[0] for i in grid])
    best = int(np.argmax(pnl_grid))
    if not pnl_grid[best] > 0:
        raise NoPositiveCapacity("optimized P&L is non-positive at every sampled level")

    x_lo = math.log(grid[max(best - 1, 0)])
    x_hi = math.log(grid[min(best + 1, grid.size - 1)])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = x_hi - invphi * (x_hi - x_lo)
    x2 = x_lo + invphi * (x_hi - x_lo)
    f1 = pnl_opt(math.exp(x1))[0]
    f2 = pnl_opt(math.exp(x2))[0]
    while (x_hi - x_lo) > relative_width:
        if f1 < f2:
            x_lo, x1, f1 = x1, x2, f2
            x2 = x_lo + invphi * (x_hi - x_lo)
            f2 = pnl_opt(math.exp(x2))[0]
        else:
            x_hi, x2, f2 = x2, x1, f1
            x1 = x_hi - invphi * (x_hi - x_lo)
            f1 = pnl_opt(math.exp(x1))[0]
    x_star = 0.5 * (x_lo + x_hi)
    i_star = math.exp(x_star)
    p_star, alloc_star = pnl_opt(i_star)
    if alloc_star is None or not p_star > 0:
        raise NoPositiveCapacity("refined capacity has non-positive P&L")

    finite = np.where(np.isfinite(pnl_grid), pnl_grid, np.nan)
    return CapacityResult(
        capacity=i_star,
        pnl_at_capacity=p_star,
        investment_grid=grid,
        pnl_grid=finite,
        bracket=(lo, hi),
        allocation=alloc_star,
    )
