"""Turnover reduction from internal crossing and per-stream linear costs.

Crossing trades between streams on one platform reduces combined turnover to

    T = rho_star * sum_i tau_i |w_i|,    0 < rho_star <= 1,

and the spectral estimate of rho_star uses the leading eigenpair of the
correlation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .covariance import _ordered_eigh
from .errors import DimensionMismatch, IndefiniteCorrelation, InputError
from .model import CostSpec

RHO_STAR_FLOOR = 1e-6
# Leading eigenvalue within this relative gap of the runner-up counts as
# degenerate: there is no dominant correlation factor and the spectral model's
# premise is shaky. The result stays deterministic via the eigenvector sign
# convention; the flag is surfaced instead.
DEGENERATE_RTOL = 1e-10


@dataclass(frozen=True)
class TurnoverModel:
    """Turnover-reduction coefficient with its estimation diagnostics."""

    rho_star: float
    source: str  # "spectral" | "override" | "no-crossing"
    universe: tuple
    psi1: float = float("nan")
    vector_sum_abs: float = float("nan")
    clamped: bool = False
    degenerate: bool = False

    @classmethod
    def no_crossing(cls, num_streams: int) -> "TurnoverModel":
        return cls(rho_star=1.0, source="no-crossing", universe=tuple(range(num_streams)))

    @classmethod
    def override(cls, rho_star: float, num_streams: int) -> "TurnoverModel":
        if not (0 < rho_star <= 1):
            raise InputError(f"rho_star override must lie in (0, 1], got {rho_star}")
        return cls(rho_star=float(rho_star), source="override", universe=tuple(range(num_streams)))


def spectral_rho_star(corr, universe=None) -> TurnoverModel:
    """Estimate the turnover-reduction coefficient from a correlation matrix.

    With psi1 the largest eigenvalue of the correlation matrix and V its
    unit-norm eigenvector,

        rho_star = psi1 * |sum_i V_i| / (N * sqrt(N)).

    Since psi1 <= N (unit diagonal) and |sum V_i| <= sqrt(N), the value never
    exceeds 1 in exact arithmetic; the clamp only absorbs rounding dust. A
    floor of ``RHO_STAR_FLOOR`` keeps the coefficient strictly positive when
    the leading eigenvector sums to ~0 (crossing cannot erase all costs).

    Parameters
    ----------
    corr : (N, N) array-like
        Symmetric with unit diagonal.
    universe : sequence of int, optional
        Index labels recorded for the streams the matrix covers; defaults to
        0..N-1.

    Raises
    ------
    IndefiniteCorrelation
        If the leading eigenvalue is non-positive (impossible for a valid
        unit-diagonal matrix; signals corrupt input).
    """
    psi = np.atleast_2d(np.asarray(corr, dtype=float))
    n = psi.shape[0]
    if psi.shape[0] != psi.shape[1]:
        raise DimensionMismatch(f"correlation matrix must be square, got {psi.shape}")
    if n < 1:
        raise InputError("correlation matrix must cover at least one stream")
    scale = max(1.0, float(np.abs(psi).max()))
    if not np.allclose(psi, psi.T, rtol=0.0, atol=1e-9 * scale):
        raise InputError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(psi), 1.0, rtol=0.0, atol=1e-9):
        raise InputError("correlation matrix must have unit diagonal")

    evals, evecs = _ordered_eigh(psi)
    psi1 = float(evals[0])
    if psi1 <= 0.0:
        raise IndefiniteCorrelation(f"leading correlation eigenvalue is {psi1:.3e}")
    degenerate = n > 1 and (psi1 - float(evals[1])) <= DEGENERATE_RTOL * psi1

    vec_sum = float(np.abs(np.sum(evecs[:, 0])))
    raw = psi1 * vec_sum / (n * np.sqrt(n))

    clamped = False
    rho = raw
    if rho > 1.0:
        rho, clamped = 1.0, True
    elif rho < RHO_STAR_FLOOR:
        rho, clamped = RHO_STAR_FLOOR, True

    if universe is None:
        universe = range(n)
    return TurnoverModel(
        rho_star=rho,
        source="spectral",
        universe=tuple(int(i) for i in universe),
        psi1=psi1,
        vector_sum_abs=vec_sum,
        clamped=clamped,
        degenerate=degenerate,
    )


def effective_turnover(turnovers, weights, rho_star: float) -> float:
    """Combined turnover T = rho_star * sum_i tau_i |w_i| (weights normalized)."""
    tau = np.asarray(turnovers, dtype=float)
    w = np.asarray(weights, dtype=float)
    if tau.shape != w.shape:
        raise DimensionMismatch(f"turnovers {tau.shape} vs weights {w.shape}")
    return float(rho_star * np.sum(tau * np.abs(w)))


def linear_cost_vector(cost_spec: CostSpec, turnovers, rho_star: float) -> np.ndarray:
    """Per-stream linear costs L_i = L * rho_star * tau_i."""
    tau = np.asarray(turnovers, dtype=float)
    return cost_spec.linear_coeff * rho_star * tau


def sample_skewness(values) -> float:
    """Bias-uncorrected sample skewness; NaN for fewer than 3 points or zero spread."""
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        return float("nan")
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        return float("nan")
    return float(np.mean(centered**3) / m2**1.5)
