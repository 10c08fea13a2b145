"""Allocate investment across alpha streams traded with internal crossing.

Streams traded on one execution platform cross trades internally, which cuts
turnover, allows negative allocation weights, and couples the cost model to
the traded universe. This package computes Sharpe-optimal weights under
linear and impact costs with a finite active-set iteration on factor-model
risk, estimates the turnover-reduction coefficient from the correlation
spectrum, locates the finite portfolio capacity under impact, and provides
regression-limit solvers for singular covariances plus a brute-force oracle
for independent validation.
"""

__version__ = "0.1.0"

from .covariance import (
    CovEstimate,
    FactorModel,
    build_factor_model,
    cholesky_factor,
    pca_factor_model,
    sample_covariance,
)
from .errors import AlphaCrossError
from .generate import GeneratedInstance, generate_instance
from .impact import (
    CapacityResult,
    ImpactSpec,
    effective_linear_costs,
    find_capacity,
    solve_with_impact,
)
from .model import (
    Allocation,
    AlphaSet,
    CostSpec,
    PnlReport,
    SolveDiagnostics,
    evaluate_pnl,
    normalize_weights,
    validate_alpha_set,
)
from .optimizer import (
    ConditionReport,
    SolveOptions,
    cost_adjusted_objective,
    solve_linear_cost,
    solve_no_cost,
    solve_with_rho_star_loop,
    verify_global_optimum,
)
from .oracle import (
    OracleResult,
    StockCostComparison,
    brute_force_solve,
    numeric_descent_check,
    stock_level_linear_cost,
)
from .regression import (
    ConvergenceReport,
    RegressionSpec,
    factor_form_weights,
    limit_consistency_check,
    regression_limit_weights,
    regression_with_costs,
    weighted_residuals,
)
from .turnover import (
    TurnoverModel,
    effective_turnover,
    linear_cost_vector,
    sample_skewness,
    spectral_rho_star,
)

__all__ = [
    "Allocation",
    "AlphaCrossError",
    "AlphaSet",
    "CapacityResult",
    "ConditionReport",
    "ConvergenceReport",
    "CostSpec",
    "CovEstimate",
    "FactorModel",
    "GeneratedInstance",
    "ImpactSpec",
    "OracleResult",
    "PnlReport",
    "RegressionSpec",
    "SolveDiagnostics",
    "SolveOptions",
    "StockCostComparison",
    "TurnoverModel",
    "brute_force_solve",
    "build_factor_model",
    "cholesky_factor",
    "cost_adjusted_objective",
    "effective_linear_costs",
    "effective_turnover",
    "evaluate_pnl",
    "factor_form_weights",
    "find_capacity",
    "generate_instance",
    "limit_consistency_check",
    "linear_cost_vector",
    "normalize_weights",
    "numeric_descent_check",
    "pca_factor_model",
    "regression_limit_weights",
    "regression_with_costs",
    "sample_covariance",
    "sample_skewness",
    "solve_linear_cost",
    "solve_no_cost",
    "solve_with_impact",
    "solve_with_rho_star_loop",
    "spectral_rho_star",
    "stock_level_linear_cost",
    "validate_alpha_set",
    "verify_global_optimum",
    "weighted_residuals",
]
