"""Sharpe-optimal weights without costs and with linear costs.

The with-costs problem minimizes, at a fixed scale lambda,

    g(w, lambda) = (lambda/2) w' C w - sum_i (alpha_i w_i - L_i |w_i|),

whose minimizer is piecewise linear in (alpha - L.eta) across sign patterns.
With a factor-model covariance C = diag(xi^2) + W W' the problem collapses to
F unknowns v_A = sum_i w_i W_iA, and a finite iteration over the active set J
and signs eta solves it exactly:

    given (J, eta):  (I_F + W_J' diag(1/xi_J^2) W_J) v
                         = W_J' diag(1/xi_J^2) (alpha_J - L_J eta_J) / lambda
    given v:         b_i = alpha_i - lambda (W v)_i
                     J = { i : |b_i| > L_i },  eta_i = sign(b_i) on J

starting from J = all streams, eta = sign(alpha). The stationary point is
certified as the global minimum by the residual and slack checks in
:func:`verify_global_optimum`.

The scale convention: the iteration runs at a fixed internal lambda (the
partition and signs do not depend on it), weights are normalized afterwards,
and the reported lambda is the one for which stationarity holds with the
normalized weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .covariance import FactorModel, sample_covariance
from .errors import (
    AllAlphasKilled,
    CycleDetected,
    DimensionMismatch,
    InputError,
    MaxIterations,
    OuterLoopCycle,
    SingularCovariance,
)
from .model import (
    Allocation,
    AlphaSet,
    CostSpec,
    SolveDiagnostics,
    normalize_weights,
    snap_tiny_weights,
)
from .turnover import TurnoverModel, linear_cost_vector, sample_skewness, spectral_rho_star

RiskModel = Union[FactorModel, np.ndarray]


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for the iterative solver.

    ``max_iterations`` defaults to 100 * N when left unset (no theoretical
    iteration bound is claimed; empirical counts are recorded in diagnostics).
    ``lambda_scale`` is the fixed internal scale; results are invariant to it.
    """

    lambda_scale: float = 1.0
    max_iterations: Optional[int] = None
    v_tolerance: float = 1e-12
    condition_tolerance: float = 1e-9
    outer_loop: bool = False
    outer_max_rounds: int = 32

    def __post_init__(self):
        if not self.lambda_scale > 0:
            raise InputError("lambda_scale must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if not (self.v_tolerance > 0 and self.condition_tolerance > 0):
            raise InputError("tolerances must be positive")
        if self.outer_max_rounds < 1:
            raise InputError("outer_max_rounds must be >= 1")


@dataclass(frozen=True)
class SolverState:
    """Inner-iteration state: active mask, signs on it, factor projections."""

    active: np.ndarray
    signs: np.ndarray
    projections: np.ndarray
    iteration: int

    def key(self) -> tuple:
        return (self.active.tobytes(), self.signs.tobytes())


@dataclass(frozen=True)
class ConditionReport:
    """Global-optimality certificate for an allocation.

    ``max_stationarity_residual`` is over active streams,
    ``min_cost_slack`` is L_j - |lambda (C w)_j - alpha_j| over inactive ones
    (+inf when none). A failing report is a value, not an error.
    """

    max_stationarity_residual: float
    min_cost_slack: float
    sign_consistent: bool
    tolerance: float
    passed: bool


def _alphas_of(alpha_set) -> np.ndarray:
    if isinstance(alpha_set, AlphaSet):
        return alpha_set.alphas
    return np.asarray(alpha_set, dtype=float)


def _risk_times(risk: RiskModel, w: np.ndarray) -> np.ndarray:
    """C @ w for a dense covariance or a factor model."""
    if isinstance(risk, FactorModel):
        return risk.specific_var * w + risk.loadings @ (risk.loadings.T @ w)
    return np.asarray(risk, dtype=float) @ w


def cost_adjusted_objective(weights, lam: float, alphas, cost_vector, risk: RiskModel) -> float:
    """g(w, lambda) = lambda/2 w'Cw - sum(alpha w - L |w|)."""
    w = np.asarray(weights, dtype=float)
    a = np.asarray(alphas, dtype=float)
    costs = np.asarray(cost_vector, dtype=float)
    quad = float(w @ _risk_times(risk, w))
    return 0.5 * lam * quad - float(np.sum(a * w - costs * np.abs(w)))


def _certificate(weights, signs, lam, alphas, cost_vector, risk: RiskModel):
    w = np.asarray(weights, dtype=float)
    cw = _risk_times(risk, w)
    grad = lam * cw - np.asarray(alphas, dtype=float)
    active = w != 0.0
    costs = np.asarray(cost_vector, dtype=float)

    sign_ok = bool(np.all(np.sign(w[active]) == signs[active])) if active.any() else True
    if active.any():
        stat = float(np.max(np.abs(grad[active] + costs[active] * signs[active])))
    else:
        stat = 0.0
    inactive = ~active
    if inactive.any():
        slack = float(np.min(costs[inactive] - np.abs(grad[inactive])))
    else:
        slack = float("inf")
    return stat, slack, sign_ok


def verify_global_optimum(
    allocation: Allocation,
    risk: RiskModel,
    alphas,
    cost_vector=None,
    tolerance: Optional[float] = None,
) -> ConditionReport:
    """Check the stationarity and inactive-slack conditions of an allocation.

    On the active set the gradient of the smooth part must cancel the cost
    subgradient exactly; on the inactive set the cost must dominate the
    would-be gradient. Both conditions together certify the global minimum of
    g for positive-semidefinite risk, because every deviation decomposes into
    non-negative terms.

    ``cost_vector`` defaults to ``allocation.effective_costs``.
    """
    if cost_vector is None:
        cost_vector = allocation.effective_costs
    tol = 1e-9 if tolerance is None else float(tolerance)
    stat, slack, sign_ok = _certificate(
        allocation.weights, allocation.signs, allocation.lambda_, _alphas_of(alphas),
        cost_vector, risk,
    )
    passed = sign_ok and stat <= tol and slack >= -tol
    return ConditionReport(
        max_stationarity_residual=stat,
        min_cost_slack=slack,
        sign_consistent=sign_ok,
        tolerance=tol,
        passed=passed,
    )


def solve_no_cost(alpha_set, cov) -> Allocation:
    """Closed-form Sharpe-maximal weights without costs: w proportional to C^-1 alpha.

    Raises
    ------
    SingularCovariance
        If the covariance cannot be Cholesky-factorized (use the
        principal-component regression pathway instead).
    AllZeroWeights
        If alpha is identically zero.
    """
    alphas = _alphas_of(alpha_set)
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    if c.shape[0] != c.shape[1] or c.shape[0] != alphas.shape[0]:
        raise DimensionMismatch(
            f"covariance {c.shape} does not match {alphas.shape[0]} alphas"
        )
    try:
        factor = cho_factor(c, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"covariance is singular or indefinite: {exc}") from exc
    w_raw = cho_solve(factor, alphas)
    w_raw = snap_tiny_weights(w_raw)
    weights, scale = normalize_weights(w_raw)
    signs = np.sign(weights).astype(int)
    zeros = np.zeros_like(weights)
    stat, slack, sign_ok = _certificate(weights, signs, scale, alphas, zeros, c)
    diag = SolveDiagnostics(
        inner_iterations=0,
        objective_value=cost_adjusted_objective(weights, scale, alphas, zeros, c),
        stationarity_residual=stat,
        cost_slack=slack,
    )
    return Allocation(
        weights=weights,
        signs=signs,
        lambda_=scale,
        rho_star=1.0,
        effective_costs=zeros,
        diagnostics=diag,
    )


def _solve_projections(loadings, inv_spec, alphas, costs, active, eta, lam):
    """Solve the F x F system for the factor projections given (J, eta)."""
    f = loadings.shape[1]
    if f == 0:
        return np.zeros(0)
    ld = loadings[active]
    wts = inv_spec[active]
    q = np.eye(f) + (ld * wts[:, None]).T @ ld
    rhs = ld.T @ ((alphas[active] - costs[active] * eta[active]) * wts) / lam
    return np.linalg.solve(q, rhs)


def solve_linear_cost(
    alpha_set,
    factor_model: FactorModel,
    cost_vector,
    options: Optional[SolveOptions] = None,
    rho_model: Optional[TurnoverModel] = None,
) -> Allocation:
    """Sharpe-maximal weights under per-stream linear costs, factor-model risk.

    Runs the finite active-set/sign iteration described in the module
    docstring. The returned allocation carries normalized weights, the
    realized scale, and a global-optimality certificate in its diagnostics.

    Parameters
    ----------
    alpha_set : AlphaSet or (N,) array
        Only the current alphas are consumed here.
    factor_model : FactorModel
        Risk model; use :meth:`FactorModel.diagonal` for pure specific risk.
    cost_vector : (N,) array
        Per-stream linear costs L_i >= 0 (already including any turnover
        reduction and impact adjustment).
    rho_model : TurnoverModel, optional
        Recorded in the result for reporting; does not affect the solve.

    Raises
    ------
    AllAlphasKilled
        Every |alpha_i| <= L_i, or the active set empties during iteration.
    CycleDetected
        A (J, eta) state repeated without convergence (should not happen for
        positive-definite factor models; converts a tie pathology into a
        diagnosable error instead of looping forever).
    MaxIterations
        Iteration cap reached.
    """
    opts = options or SolveOptions()
    alphas = _alphas_of(alpha_set)
    n = alphas.shape[0]
    costs = np.asarray(cost_vector, dtype=float)
    if costs.shape != alphas.shape:
        raise DimensionMismatch(f"cost vector {costs.shape} vs alphas {alphas.shape}")
    if (costs < 0).any():
        raise InputError("linear costs must be non-negative")
    if factor_model.num_streams != n:
        raise DimensionMismatch(
            f"factor model covers {factor_model.num_streams} streams, alphas {n}"
        )
    if np.all(np.abs(alphas) <= costs):
        raise AllAlphasKilled("every alpha lies inside its cost band; optimum is all-zero")

    loadings = factor_model.loadings
    inv_spec = 1.0 / factor_model.specific_var
    lam = opts.lambda_scale
    max_iter = opts.max_iterations if opts.max_iterations is not None else 100 * n

    active = np.ones(n, dtype=bool)
    eta = np.where(alphas >= 0, 1, -1).astype(int)
    seen = {(active.tobytes(), eta.tobytes())}

    v = np.zeros(loadings.shape[1])
    b = alphas.copy()
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        v = _solve_projections(loadings, inv_spec, alphas, costs, active, eta, lam)
        b = alphas - lam * (loadings @ v)
        new_active = np.abs(b) > costs
        if not new_active.any():
            raise AllAlphasKilled("iteration emptied the active set")
        new_eta = np.where(new_active, np.where(b >= 0, 1, -1), 0).astype(int)
        if np.array_equal(new_active, active) and np.array_equal(
            new_eta[new_active], eta[new_active]
        ):
            converged = True
            break
        key = (new_active.tobytes(), new_eta.tobytes())
        if key in seen:
            raise CycleDetected(
                f"state (J, eta) revisited at iteration {iterations} without converging",
                state=SolverState(active=new_active, signs=new_eta, projections=v,
                                  iteration=iterations),
            )
        seen.add(key)
        active, eta = new_active, new_eta
    if not converged:
        raise MaxIterations(f"inner loop did not stabilize within {max_iter} iterations")

    # The projections are a deterministic function of (J, eta); recomputing at
    # the fixed point realizes the "v unchanged" stopping criterion.
    v_check = _solve_projections(loadings, inv_spec, alphas, costs, active, eta, lam)
    v_residual = float(np.max(np.abs(v_check - v))) if v.size else 0.0
    v_scale = 1.0 + (float(np.max(np.abs(v))) if v.size else 0.0)
    if v_residual > opts.v_tolerance * v_scale:
        raise CycleDetected(
            f"projections failed to stabilize (residual {v_residual:.3e})",
            state=SolverState(active=active, signs=eta, projections=v, iteration=iterations),
        )

    w_raw = np.zeros(n)
    w_raw[active] = (b[active] - costs[active] * eta[active]) / (lam * factor_model.specific_var[active])
    w_raw = snap_tiny_weights(w_raw)
    if not (w_raw != 0.0).any():
        raise AllAlphasKilled("all surviving weights rounded to zero")
    weights, scale = normalize_weights(w_raw)
    lam_real = lam * scale
    signs = np.where(weights > 0, 1, np.where(weights < 0, -1, 0)).astype(int)

    stat, slack, sign_ok = _certificate(weights, signs, lam_real, alphas, costs, factor_model)
    diag = SolveDiagnostics(
        inner_iterations=iterations,
        objective_value=cost_adjusted_objective(weights, lam_real, alphas, costs, factor_model),
        stationarity_residual=stat,
        cost_slack=slack,
        projection_residual=v_residual,
        rho_star_source=rho_model.source if rho_model is not None else "no-crossing",
        rho_star_clamped=rho_model.clamped if rho_model is not None else False,
        rho_star_degenerate=rho_model.degenerate if rho_model is not None else False,
    )
    return Allocation(
        weights=weights,
        signs=signs,
        lambda_=lam_real,
        rho_star=rho_model.rho_star if rho_model is not None else 1.0,
        effective_costs=costs,
        diagnostics=diag,
    )


def solve_with_rho_star_loop(
    alpha_set: AlphaSet,
    factor_model: Union[FactorModel, Callable],
    cost_spec: CostSpec,
    options: Optional[SolveOptions] = None,
    corr: Optional[np.ndarray] = None,
) -> Allocation:
    """Alternate the linear-cost solve with turnover-reduction recomputation.

    The turnover-reduction coefficient depends on the traded universe, so when
    the solver zeroes out streams they are dropped, rho_star is recomputed on
    the correlation sub-matrix of the survivors, and the solve repeats. The
    fixed point is reached when the universe rho_star was computed on equals
    the resulting active set. Dropping is monotone, so at most N rounds run.

    Parameters
    ----------
    factor_model : FactorModel or callable(indices) -> FactorModel
        A fixed model is restricted exactly (rows of the loadings); a callable
        may rebuild the model per sub-universe.
    corr : (N, N) array, optional
        Correlation matrix for the spectral estimate; defaults to the sample
        correlation of ``alpha_set.history``.

    Notes
    -----
    The optimality certificate in the result applies to the final universe:
    streams dropped in earlier rounds were removed from the problem, not
    certified against the final costs.
    """
    opts = options or SolveOptions(outer_loop=True)
    n = alpha_set.num_streams
    if corr is None and cost_spec.rho_star_override is None:
        corr = sample_covariance(alpha_set.history).corr

    def build_model(indices):
        if isinstance(factor_model, FactorModel):
            return factor_model.restrict(indices)
        return factor_model(indices)

    universe = tuple(range(n))
    seen = {universe}
    history = [universe]
    rounds = 0
    total_inner = 0
    while True:
        rounds += 1
        if rounds > opts.outer_max_rounds:
            raise MaxIterations(
                f"turnover-reduction loop exceeded {opts.outer_max_rounds} rounds"
            )
        if cost_spec.rho_star_override is not None:
            rho_model = replace(
                TurnoverModel.override(cost_spec.rho_star_override, len(universe)),
                universe=universe,
            )
        else:
            sub_corr = corr[np.ix_(universe, universe)]
            rho_model = spectral_rho_star(sub_corr, universe=universe)
        sub = alpha_set.restrict(universe)
        sub_costs = linear_cost_vector(cost_spec, sub.turnovers, rho_model.rho_star)
        alloc = solve_linear_cost(sub, build_model(universe), sub_costs, opts, rho_model)
        total_inner += alloc.diagnostics.inner_iterations

        active_global = tuple(universe[i] for i in alloc.active_set)
        if set(active_global) == set(universe):
            break
        if active_global in seen:
            raise OuterLoopCycle(f"universe {active_global} revisited")
        seen.add(active_global)
        history.append(active_global)
        universe = active_global

    weights = np.zeros(n)
    signs = np.zeros(n, dtype=int)
    idx = list(universe)
    weights[idx] = alloc.weights
    signs[idx] = alloc.signs
    effective = linear_cost_vector(cost_spec, alpha_set.turnovers, rho_model.rho_star)
    diag = replace(
        alloc.diagnostics,
        inner_iterations=total_inner,
        outer_rounds=rounds,
        universe_history=tuple(history),
        tau_skewness=sample_skewness(alpha_set.turnovers),
    )
    return Allocation(
        weights=weights,
        signs=signs,
        lambda_=alloc.lambda_,
        rho_star=rho_model.rho_star,
        effective_costs=effective,
        diagnostics=diag,
    )
