"""Core domain types and the operations shared by every other module.

The unit conventions used throughout the library:

* alphas are dimensionless expected returns per rebalance period, with any
  leverage already multiplied in (pre-levered by contract);
* turnovers are dimensionless fractions of invested dollars traded per
  rebalance period;
* weights are dimensionless and normalized so that sum(|w_i|) = 1;
* investment level, P&L, volatility, costs and dollar turnover are dollars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AllZeroWeights,
    DimensionMismatch,
    InputError,
    MissingValues,
    NegativeTurnover,
    ZeroVolatility,
)

# Relative magnitude below which a weight is treated as an exact zero and the
# stream moved to the inactive set. The solver produces analytic zeros; this
# only guards floating-point dust.
ZERO_WEIGHT_RTOL = 1e-12


def _as_float_array(x, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AlphaSet:
    """Current alphas, their history and per-stream turnovers.

    Attributes
    ----------
    alphas : (N,) array
        Most recent expected returns, leverage already absorbed.
    history : (M+1, N) array
        Observations per stream; row 0 is the most recent time.
    turnovers : (N,) array
        Per-stream turnover fractions, all >= 0.
    labels : tuple of str
        Unique stream identifiers aligned with the columns of ``history``.
    """

    alphas: np.ndarray
    history: np.ndarray
    turnovers: np.ndarray
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas", _as_float_array(self.alphas, "alphas", 1))
        object.__setattr__(self, "history", _as_float_array(self.history, "history", 2))
        object.__setattr__(self, "turnovers", _as_float_array(self.turnovers, "turnovers", 1))
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        for arr in (self.alphas, self.history, self.turnovers):
            arr.flags.writeable = False

    @property
    def num_streams(self) -> int:
        return self.alphas.shape[0]

    @property
    def num_observations(self) -> int:
        return self.history.shape[0]

    def restrict(self, indices: Sequence[int]) -> "AlphaSet":
        """Sub-universe view used by the turnover-reduction recompute loop."""
        idx = list(indices)
        return AlphaSet(
            alphas=self.alphas[idx],
            history=self.history[:, idx],
            turnovers=self.turnovers[idx],
            labels=tuple(self.labels[i] for i in idx),
        )


@dataclass(frozen=True)
class CostSpec:
    """Cost model parameters.

    ``linear_coeff`` is the linear cost L as a fraction of dollars traded,
    ``impact_coeff`` and ``impact_exponent`` are the impact parameters
    (Q in dollars^(1-n), n > 1 dimensionless), ``investment`` is the dollar
    investment level I, and ``rho_star_override`` pins the turnover-reduction
    coefficient instead of estimating it from the correlation spectrum.
    """

    linear_coeff: float = 0.0
    impact_coeff: float = 0.0
    impact_exponent: float = 1.5
    investment: float = 1.0
    rho_star_override: Optional[float] = None

    def __post_init__(self):
        if self.linear_coeff < 0:
            raise InputError(f"linear_coeff must be >= 0, got {self.linear_coeff}")
        if self.impact_coeff < 0:
            raise InputError(f"impact_coeff must be >= 0, got {self.impact_coeff}")
        if self.impact_coeff > 0 and not self.impact_exponent > 1:
            raise InputError(
                f"impact_exponent must be > 1 when impact_coeff > 0, got {self.impact_exponent}"
            )
        if not self.investment > 0:
            raise InputError(f"investment must be > 0, got {self.investment}")
        if self.rho_star_override is not None and not (0 < self.rho_star_override <= 1):
            raise InputError(
                f"rho_star_override must lie in (0, 1], got {self.rho_star_override}"
            )


@dataclass(frozen=True)
class SolveDiagnostics:
    """Convergence and certificate data attached to an Allocation."""

    inner_iterations: int = 0
    outer_rounds: int = 1
    objective_value: float = float("nan")
    stationarity_residual: float = 0.0
    cost_slack: float = float("inf")
    projection_residual: float = 0.0
    rho_star_source: str = "no-crossing"
    rho_star_clamped: bool = False
    rho_star_degenerate: bool = False
    tau_skewness: Optional[float] = None
    universe_history: Optional[tuple] = None


@dataclass(frozen=True)
class Allocation:
    """Optimizer output: normalized weights plus the certificate inputs.

    ``signs`` holds +1/-1 on the active set and 0 on inactive streams;
    ``lambda_`` is the realized scale for which the stationarity conditions
    hold with the normalized weights; ``effective_costs`` is the per-stream
    linear cost vector actually applied (possibly impact-adjusted).
    """

    weights: np.ndarray
    signs: np.ndarray
    lambda_: float
    rho_star: float
    effective_costs: np.ndarray
    diagnostics: SolveDiagnostics = field(default_factory=SolveDiagnostics)

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_float_array(self.weights, "weights", 1))
        signs = np.asarray(self.signs, dtype=int)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(
            self, "effective_costs", _as_float_array(self.effective_costs, "effective_costs", 1)
        )
        self.weights.flags.writeable = False
        self.signs.flags.writeable = False
        self.effective_costs.flags.writeable = False

    @property
    def active_set(self) -> tuple:
        """Indices with nonzero weight."""
        return tuple(int(i) for i in np.flatnonzero(self.weights != 0.0))

    @property
    def inactive_set(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.weights == 0.0))


@dataclass(frozen=True)
class PnlReport:
    """Dollar P&L decomposition for a normalized allocation."""

    pnl: float
    volatility: float
    sharpe: float
    linear_cost_total: float
    impact_cost_total: float
    dollar_turnover: float
    turnover: float
    impact_cost_approx: Optional[float] = None


def validate_alpha_set(history, turnovers, labels=None, alphas=None) -> AlphaSet:
    """Validate raw stream data and assemble an :class:`AlphaSet`.

    Parameters
    ----------
    history : (M+1, N) array-like, or an AlphaSet to re-validate
        Row 0 must be the most recent observation.
    turnovers : (N,) array-like
        Per-stream turnover fractions.
    labels : sequence of str, optional
        Defaults to ``a01..aNN``.
    alphas : (N,) array-like, optional
        Current alphas; defaults to ``history[0]`` (the most recent row).

    Raises
    ------
    MissingValues
        Any non-finite cell in history, alphas or turnovers.
    DimensionMismatch
        Inconsistent N across history, turnovers and labels, or duplicates.
    NegativeTurnover
        Any turnover below zero.
    """
    if isinstance(history, AlphaSet):
        src = history
        return validate_alpha_set(src.history, src.turnovers, src.labels, src.alphas)

    hist = _as_float_array(history, "history", 2)
    tau = _as_float_array(turnovers, "turnovers", 1)
    n = hist.shape[1]
    if n < 1:
        raise DimensionMismatch("need at least one stream")
    if tau.shape[0] != n:
        raise DimensionMismatch(f"history has {n} streams but turnovers has {tau.shape[0]}")
    if labels is None:
        labels = tuple(f"a{i + 1:02d}" for i in range(n))
    labels = tuple(str(l) for l in labels)
    if len(labels) != n:
        raise DimensionMismatch(f"history has {n} streams but labels has {len(labels)}")
    if len(set(labels)) != n:
        raise DimensionMismatch("stream labels must be unique")
    if alphas is None:
        alphas = hist[0]
    alphas = _as_float_array(alphas, "alphas", 1)
    if alphas.shape[0] != n:
        raise DimensionMismatch(f"history has {n} streams but alphas has {alphas.shape[0]}")

    if not np.isfinite(hist).all():
        bad = np.argwhere(~np.isfinite(hist))
        r, c = bad[0]
        raise MissingValues(
            f"history contains {bad.shape[0]} missing/non-finite cells "
            f"(first at row {r}, stream '{labels[c]}')"
        )
    if not np.isfinite(alphas).all():
        raise MissingValues("alphas contain non-finite values")
    if not np.isfinite(tau).all():
        raise MissingValues("turnovers contain non-finite values")
    if (tau < 0).any():
        i = int(np.argmin(tau))
        raise NegativeTurnover(f"turnover of stream '{labels[i]}' is {tau[i]}")

    return AlphaSet(alphas=alphas, history=hist, turnovers=tau, labels=labels)


def snap_tiny_weights(w_raw: np.ndarray) -> np.ndarray:
    """Zero out entries below ``ZERO_WEIGHT_RTOL`` times the largest magnitude."""
    w = np.asarray(w_raw, dtype=float).copy()
    top = np.max(np.abs(w)) if w.size else 0.0
    if top > 0.0:
        w[np.abs(w) < ZERO_WEIGHT_RTOL * top] = 0.0
    return w


def normalize_weights(w_raw) -> tuple:
    """Rescale raw weights so absolute values sum to one.

    Returns ``(weights, scale)`` where ``scale = sum(|w_raw|)``. Signs and the
    zero pattern are preserved. Normalizing twice is the identity on weights.

    Raises
    ------
    AllZeroWeights
        If ``sum(|w_raw|) == 0`` — costs killed every alpha and no valid
        allocation exists.
    """
    w = _as_float_array(w_raw, "weights", 1)
    scale = float(np.sum(np.abs(w)))
    if scale == 0.0:
        raise AllZeroWeights("all raw weights are zero; nothing to allocate")
    return w / scale, scale


def portfolio_variance(weights: np.ndarray, cov=None, factor_model=None) -> float:
    """w' C w, with C given explicitly or in factor form (specific + loadings)."""
    w = np.asarray(weights, dtype=float)
    if factor_model is not None:
        proj = factor_model.loadings.T @ w
        return float(np.sum(factor_model.specific_var * w**2) + proj @ proj)
    if cov is None:
        raise InputError("portfolio_variance needs cov or factor_model")
    c = np.asarray(cov, dtype=float)
    return float(w @ c @ w)


def evaluate_pnl(
    alpha_set: AlphaSet,
    weights,
    cost_spec: CostSpec,
    rho_star: float,
    cov=None,
    factor_model=None,
) -> PnlReport:
    """Exact P&L, volatility and Sharpe of a normalized allocation.

    The impact term is the full nonlinear cost (Q/n) * D^n with
    D = I * rho_star * sum(tau_i |w_i|); no expansion is applied here, so the
    report exposes the error of any approximation used while solving.

    Parameters
    ----------
    cov, factor_model
        Risk model used for the volatility; when both are omitted the sample
        covariance of ``alpha_set.history`` is used.

    Raises
    ------
    ZeroVolatility
        When w' C w is zero and the Sharpe ratio is undefined.
    """
    w = _as_float_array(weights, "weights", 1)
    if w.shape[0] != alpha_set.num_streams:
        raise DimensionMismatch(
            f"weights has {w.shape[0]} entries for {alpha_set.num_streams} streams"
        )
    if cov is None and factor_model is None:
        from .covariance import sample_covariance

        cov = sample_covariance(alpha_set.history).cov

    investment = cost_spec.investment
    abs_w = np.abs(w)
    tau_dot = float(np.sum(alpha_set.turnovers * abs_w))
    turnover = rho_star * tau_dot
    dollar_turnover = investment * turnover

    gross = investment * float(np.sum(alpha_set.alphas * w))
    linear_total = investment * cost_spec.linear_coeff * turnover
    if cost_spec.impact_coeff > 0 and dollar_turnover > 0:
        impact_total = (cost_spec.impact_coeff / cost_spec.impact_exponent) * (
            dollar_turnover**cost_spec.impact_exponent
        )
    else:
        impact_total = 0.0

    variance = portfolio_variance(w, cov=cov, factor_model=factor_model)
    if variance <= 0.0:
        raise ZeroVolatility("portfolio variance is zero; Sharpe ratio undefined")
    volatility = investment * float(np.sqrt(variance))
    pnl = gross - linear_total - impact_total

    return PnlReport(
        pnl=pnl,
        volatility=volatility,
        sharpe=pnl / volatility,
        linear_cost_total=linear_total,
        impact_cost_total=impact_total,
        dollar_turnover=dollar_turnover,
        turnover=turnover,
    )
