"""Regression limits of the optimizer, for-singular-covariance workflows.

As the specific variances shrink uniformly to zero (with the scale soaked up
into the normalization), the no-cost optimal weights tend to

    w_i  proportional to  eps_i / v_i,

where eps are the residuals of a weighted cross-sectional regression (weights
1/v_i, no intercept) of the alphas on the factor loadings. The combined
portfolio is then exactly factor-neutral: sum_i w_i Lambda_iC = 0. The same
limit applied to the with-costs iteration replaces the factor-projection
solve with a weighted regression of alpha_i - L_i eta_i over the loadings,
restricted to the active set. This is the practical route when the sample
covariance is singular (few observations): use principal-component loadings
and the covariance diagonal as regression weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .covariance import FactorModel
from .errors import (
    AllAlphasKilled,
    AllZeroWeights,
    CycleDetected,
    DimensionMismatch,
    InputError,
    MaxIterations,
    RankDeficientLoadings,
)
from .model import (
    Allocation,
    AlphaSet,
    SolveDiagnostics,
    normalize_weights,
    snap_tiny_weights,
)
from .optimizer import SolveOptions, SolverState, solve_linear_cost

CONDITION_LIMIT = 1e12
DEFAULT_ZETA_SEQUENCE = (1.0, 1e-2, 1e-4, 1e-6)


@dataclass(frozen=True)
class RegressionSpec:
    """Loadings and positive regression weights (inverse variances)."""

    loadings: np.ndarray
    reg_weights: np.ndarray

    def __post_init__(self):
        ld = np.asarray(self.loadings, dtype=float)
        if ld.ndim == 1:
            ld = ld.reshape(-1, 1)
        w = np.asarray(self.reg_weights, dtype=float)
        if w.ndim != 1 or ld.shape[0] != w.shape[0]:
            raise DimensionMismatch(
                f"loadings {ld.shape} and reg_weights {w.shape} do not align"
            )
        if ld.shape[1] > ld.shape[0]:
            raise InputError("more factor columns than streams")
        if not (w > 0).all():
            raise InputError("regression weights must be strictly positive")
        object.__setattr__(self, "loadings", ld)
        object.__setattr__(self, "reg_weights", w)
        ld.flags.writeable = False
        w.flags.writeable = False

    @property
    def num_factors(self) -> int:
        return self.loadings.shape[1]

    @classmethod
    def from_variances(cls, loadings, variances) -> "RegressionSpec":
        v = np.asarray(variances, dtype=float)
        if not (v > 0).all():
            raise InputError("variances must be strictly positive")
        return cls(loadings=loadings, reg_weights=1.0 / v)

    @classmethod
    def from_factor_model(cls, model: FactorModel) -> "RegressionSpec":
        return cls.from_variances(model.loadings, model.specific_var)


@dataclass(frozen=True)
class ConvergenceReport:
    """Gap between full-optimizer weights and the regression limit per zeta."""

    zetas: tuple
    gaps: tuple
    strictly_decreasing: bool
    final_gap: float


def _wls_coefficients(loadings, weights, values, active=None):
    """Normal-equation solve of the weighted regression restricted to ``active``."""
    if active is None:
        ld, w, y = loadings, weights, values
    else:
        ld, w, y = loadings[active], weights[active], values[active]
    k = loadings.shape[1]
    if k == 0:
        return np.zeros(0)
    gram = (ld * w[:, None]).T @ ld
    if not np.isfinite(gram).all() or np.linalg.cond(gram) > CONDITION_LIMIT:
        raise RankDeficientLoadings(
            "loadings lack full column rank under the weighted inner product"
        )
    return np.linalg.solve(gram, ld.T @ (w * y))


def weighted_residuals(values, spec: RegressionSpec):
    """Residuals and coefficients of the weighted no-intercept regression.

    Minimizes sum_i reg_weights_i * (y_i - sum_A Lambda_iA c_A)^2 and returns
    ``(residuals, coefficients)``. Residuals are orthogonal to every loading
    column under the weighted inner product; they are invariant under
    loadings -> loadings @ Z for nonsingular Z (the coefficients are not).
    """
    y = np.asarray(values, dtype=float)
    if y.shape[0] != spec.loadings.shape[0]:
        raise DimensionMismatch(f"values {y.shape} vs loadings {spec.loadings.shape}")
    coef = _wls_coefficients(spec.loadings, spec.reg_weights, y)
    return y - spec.loadings @ coef, coef


def regression_limit_weights(alpha_set, spec: RegressionSpec) -> Allocation:
    """No-cost optimal weights in the vanishing-specific-variance limit.

    w_i is proportional to reg_weights_i * eps_i with eps the weighted
    regression residuals of the alphas on the loadings; the result is
    factor-neutral by construction.

    Raises
    ------
    AllZeroWeights
        If the alphas lie in the loadings' column span: nothing stream-
        specific remains to trade.
    """
    alphas = alpha_set.alphas if isinstance(alpha_set, AlphaSet) else np.asarray(alpha_set, float)
    eps, _ = weighted_residuals(alphas, spec)
    w_raw = snap_tiny_weights(spec.reg_weights * eps)
    # Residual dust from a perfect factor fit must read as "no signal", not as
    # a spurious allocation.
    alpha_scale = float(np.max(np.abs(alphas))) if alphas.size else 0.0
    if alpha_scale > 0 and float(np.max(np.abs(eps))) < 1e-12 * alpha_scale:
        raise AllZeroWeights("alphas lie in the factor span; residuals are zero")
    weights, scale = normalize_weights(w_raw)
    signs = np.where(weights > 0, 1, np.where(weights < 0, -1, 0)).astype(int)
    return Allocation(
        weights=weights,
        signs=signs,
        lambda_=scale,
        rho_star=1.0,
        effective_costs=np.zeros_like(weights),
        diagnostics=SolveDiagnostics(inner_iterations=0),
    )


def regression_with_costs(
    alpha_set,
    spec: RegressionSpec,
    cost_vector,
    options: Optional[SolveOptions] = None,
) -> Allocation:
    """Active-set iteration in the regression limit, with linear costs.

    Each pass regresses alpha_i - L_i eta_i on the loadings over the current
    active set, extends the fitted projection to all streams, and re-splits
    streams by whether |alpha_i - projection_i| clears the cost band. At the
    fixed point w_i = reg_weights_i * residual_i on the active set (scaled to
    the unit budget) and the active weights are factor-neutral.

    Raises
    ------
    AllAlphasKilled, CycleDetected, MaxIterations
        As in the full optimizer.
    RankDeficientLoadings
        If the surviving active set no longer spans the factor columns.
    """
    opts = options or SolveOptions()
    alphas = alpha_set.alphas if isinstance(alpha_set, AlphaSet) else np.asarray(alpha_set, float)
    costs = np.asarray(cost_vector, dtype=float)
    if costs.shape != alphas.shape:
        raise DimensionMismatch(f"cost vector {costs.shape} vs alphas {alphas.shape}")
    if (costs < 0).any():
        raise InputError("linear costs must be non-negative")
    n = alphas.shape[0]
    if np.all(np.abs(alphas) <= costs):
        raise AllAlphasKilled("every alpha lies inside its cost band")

    loadings = spec.loadings
    max_iter = opts.max_iterations if opts.max_iterations is not None else 100 * n

    active = np.ones(n, dtype=bool)
    eta = np.where(alphas >= 0, 1, -1).astype(int)
    seen = {(active.tobytes(), eta.tobytes())}
    coef = np.zeros(spec.num_factors)
    b = alphas.copy()
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        y = alphas - costs * eta
        coef = _wls_coefficients(loadings, spec.reg_weights, y, active)
        b = alphas - loadings @ coef
        # Boundary ties belong to the inactive set; the dust tolerance extends
        # that rule to floating point, which matters when the loadings
        # interpolate the active set exactly (|b| lands on the cost boundary).
        tie_tol = 1e-12 * max(1.0, float(np.max(np.abs(b))))
        new_active = np.abs(b) - costs > tie_tol
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
                f"state revisited at iteration {iterations} without converging",
                state=SolverState(active=new_active, signs=new_eta, projections=coef,
                                  iteration=iterations),
            )
        seen.add(key)
        active, eta = new_active, new_eta
    if not converged:
        raise MaxIterations(f"regression iteration did not stabilize within {max_iter}")

    coef_check = _wls_coefficients(loadings, spec.reg_weights, alphas - costs * eta, active)
    coef_residual = float(np.max(np.abs(coef_check - coef))) if coef.size else 0.0

    w_raw = np.zeros(n)
    w_raw[active] = (b[active] - costs[active] * eta[active]) * spec.reg_weights[active]
    w_raw = snap_tiny_weights(w_raw)
    if not (w_raw != 0.0).any():
        raise AllAlphasKilled("all surviving weights rounded to zero")
    weights, scale = normalize_weights(w_raw)
    signs = np.where(weights > 0, 1, np.where(weights < 0, -1, 0)).astype(int)
    return Allocation(
        weights=weights,
        signs=signs,
        lambda_=scale,
        rho_star=1.0,
        effective_costs=costs,
        diagnostics=SolveDiagnostics(
            inner_iterations=iterations,
            projection_residual=coef_residual,
        ),
    )


def factor_form_weights(alphas, loadings, specific_var) -> np.ndarray:
    """Closed-form unnormalized no-cost weights for factor-form covariance.

    For C = diag(v) + Lambda Lambda' this evaluates C^-1 alpha through the
    K x K system (I_K + Lambda' diag(1/v) Lambda) z = Lambda' (alpha / v):

        w = (alpha - Lambda z) / v.
    """
    a = np.asarray(alphas, dtype=float)
    v = np.asarray(specific_var, dtype=float)
    lam = np.asarray(loadings, dtype=float)
    if lam.ndim == 1:
        lam = lam.reshape(-1, 1)
    if not (v > 0).all():
        raise InputError("specific variances must be positive")
    if lam.shape[1] == 0:
        return a / v
    u = a / v
    gram = np.eye(lam.shape[1]) + (lam / v[:, None]).T @ lam
    z = np.linalg.solve(gram, lam.T @ u)
    return (a - lam @ z) / v


def limit_consistency_check(
    alpha_set,
    factor_model: FactorModel,
    zeta_sequence: Sequence[float] = DEFAULT_ZETA_SEQUENCE,
    options: Optional[SolveOptions] = None,
) -> ConvergenceReport:
    """Verify that shrinking specific variance drives the optimizer to the
    regression limit.

    For each zeta, solves the no-cost problem with specific variances
    zeta * v_i (same loadings) and measures the 2-norm distance between its
    normalized weights and the regression-limit weights. The distances must
    shrink toward zero as zeta does.
    """
    zetas = tuple(float(z) for z in zeta_sequence)
    if not zetas or any(z <= 0 for z in zetas):
        raise InputError("zeta_sequence must be positive")
    if any(a <= b for a, b in zip(zetas, zetas[1:])):
        raise InputError("zeta_sequence must be strictly decreasing")

    spec = RegressionSpec.from_factor_model(factor_model)
    reference = regression_limit_weights(alpha_set, spec).weights

    gaps = []
    zero_costs = np.zeros(factor_model.num_streams)
    for zeta in zetas:
        scaled = FactorModel(
            specific_var=zeta * factor_model.specific_var,
            loadings=factor_model.loadings,
            provenance=factor_model.provenance,
        )
        alloc = solve_linear_cost(alpha_set, scaled, zero_costs, options)
        gaps.append(float(np.linalg.norm(alloc.weights - reference)))

    decreasing = all(gaps[i] > gaps[i + 1] for i in range(len(gaps) - 1))
    return ConvergenceReport(
        zetas=zetas,
        gaps=tuple(gaps),
        strictly_decreasing=decreasing,
        final_gap=gaps[-1] if gaps else float("nan"),
    )
