"""Independent verification tools.

Three routes that deliberately avoid the production solver's code path:

* exhaustive minimization of g(w, lambda) over all 3^N sign/zero patterns for
  small N, used as the ground truth the iterative solver is checked against;
* random-perturbation descent checks around a claimed optimum;
* stock-level aggregation of linear costs validating the "fixed fraction of
  dollars traded" portfolio-level shortcut.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionMismatch, InputError, NoFeasiblePattern, TooManyStreams

MAX_ORACLE_STREAMS = 8


@dataclass(frozen=True)
class OracleResult:
    """Global minimum over all sign/zero patterns.

    ``pattern`` holds -1/0/+1 per stream; ``weights`` are the unnormalized
    minimizers at the given lambda. ``ties`` lists patterns whose objective
    ties the minimum (possible only with zero costs or flat directions);
    ``sign_inconsistent`` collects patterns that solved the active-set
    stationarity equations but contradicted their own sign assumption.
    """

    weights: np.ndarray
    objective: float
    pattern: tuple
    lambda_: float
    examined: int
    feasible: tuple
    ties: tuple
    sign_inconsistent: tuple


class StockCostComparison(NamedTuple):
    exact_cost: float
    approx_cost: float
    relative_gap: float
    dollar_turnover: float


def _pattern_solution(cov, alphas, costs, support, signs, lam):
    """Minimizer of g restricted to the support with fixed signs."""
    sub = np.ix_(support, support)
    rhs = alphas[support] - costs[support] * signs
    return np.linalg.solve(cov[sub], rhs) / lam


def brute_force_solve(
    alphas,
    cov,
    cost_vector,
    lam: float = 1.0,
    feasibility_tol: float = 1e-12,
) -> OracleResult:
    """Exhaustive search of g(w, lambda) over every sign/zero pattern.

    For each of the 3^N patterns (the all-zero one included) the restricted
    stationarity system is solved exactly; a pattern is feasible when the
    solution's signs match the assumed ones and every zeroed stream's
    would-be gradient stays inside its cost band. The feasible pattern with
    the smallest objective is the global minimum; ties break toward fewer
    active streams, then lexicographic pattern order.

    Raises
    ------
    TooManyStreams
        N > 8 (3^N times a dense solve becomes unreasonable).
    NoFeasiblePattern
        Only the empty pattern survives: costs kill everything.
    """
    a = np.asarray(alphas, dtype=float)
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    costs = np.asarray(cost_vector, dtype=float)
    n = a.shape[0]
    if n > MAX_ORACLE_STREAMS:
        raise TooManyStreams(f"{n} streams would need {3**n} patterns; cap is {MAX_ORACLE_STREAMS}")
    if c.shape != (n, n):
        raise DimensionMismatch(f"covariance {c.shape} for {n} alphas")
    if costs.shape != a.shape:
        raise DimensionMismatch(f"cost vector {costs.shape} vs alphas {a.shape}")
    if lam <= 0:
        raise InputError("lambda must be positive")

    examined = 0
    feasible = []
    sign_inconsistent = []

    # Group patterns by support: one restricted solve per sign vector, with
    # all 2^|J| sign vectors of a support batched through the same factorization.
    for support_bits in itertools.product((0, 1), repeat=n):
        support = [i for i, bit in enumerate(support_bits) if bit]
        k = len(support)
        if k == 0:
            examined += 1
            # Empty pattern: w = 0, g = 0; feasible iff every alpha sits
            # inside its cost band.
            if np.all(np.abs(a) <= costs + feasibility_tol):
                feasible.append(((0.0, 0, tuple([0] * n)), np.zeros(n)))
            continue
        c_sub = c[np.ix_(support, support)]
        comp = [j for j in range(n) if j not in support]
        cross = c[np.ix_(comp, support)] if comp else None

        sign_choices = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
        rhs = a[support][None, :] - costs[support][None, :] * sign_choices
        sol = np.linalg.solve(c_sub, rhs.T).T / lam
        examined += sign_choices.shape[0]

        ok_sign = np.all(sol * sign_choices > 0.0, axis=1)
        for row in np.flatnonzero(~ok_sign):
            pat = tuple(
                int(sign_choices[row][support.index(i)]) if i in support else 0
                for i in range(n)
            )
            sign_inconsistent.append(pat)
        if not ok_sign.any():
            continue

        for row in np.flatnonzero(ok_sign):
            w_sub = sol[row]
            if comp:
                grad = lam * (cross @ w_sub) - a[comp]
                if not np.all(np.abs(grad) <= costs[comp] + feasibility_tol):
                    continue
            w = np.zeros(n)
            w[support] = w_sub
            quad = float(w_sub @ c_sub @ w_sub)
            g = 0.5 * lam * quad - float(np.sum(a * w - costs * np.abs(w)))
            pat = tuple(
                int(sign_choices[row][support.index(i)]) if i in support else 0
                for i in range(n)
            )
            feasible.append(((g, k, pat), w))

    if examined != 3**n:
        raise AssertionError(f"enumeration covered {examined} patterns, expected {3**n}")
    if not feasible:
        raise NoFeasiblePattern("no pattern satisfies the optimality conditions")

    feasible.sort(key=lambda item: item[0])
    (g_best, _, pat_best), w_best = feasible[0]
    if not any(pat_best):
        raise NoFeasiblePattern("only the empty pattern survives; costs kill everything")
    tie_tol = 1e-12 * (1.0 + abs(g_best))
    ties = tuple(item[0][2] for item in feasible if abs(item[0][0] - g_best) <= tie_tol)

    return OracleResult(
        weights=w_best,
        objective=g_best,
        pattern=pat_best,
        lambda_=lam,
        examined=examined,
        feasible=tuple(item[0][2] for item in feasible),
        ties=ties,
        sign_inconsistent=tuple(sign_inconsistent),
    )


def numeric_descent_check(
    alphas,
    cov,
    cost_vector,
    lam: float,
    weights,
    num_draws: int = 10_000,
    scales=(1e-4, 1e-3, 1e-2, 1e-1),
    seed: int = 20140519,
) -> float:
    """Worst g(w + e) - g(w) over random and coordinate perturbations.

    A true global minimum never yields a negative difference; rounding allows
    dust of order -1e-12. Directions are standard normal rescaled to each
    scale in ``scales`` (cycled across draws), plus +/- scale on every
    coordinate axis. The seed is fixed for reproducibility.
    """
    a = np.asarray(alphas, dtype=float)
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    costs = np.asarray(cost_vector, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]

    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((num_draws, n))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    scale_cycle = np.asarray(scales, dtype=float)[np.arange(num_draws) % len(scales)]
    perturbations = dirs / norms * scale_cycle[:, None]

    axes = []
    for s in scales:
        eye = np.eye(n) * s
        axes.append(eye)
        axes.append(-eye)
    perturbations = np.vstack([perturbations] + axes)

    def g_batch(points):
        quad = np.einsum("ij,jk,ik->i", points, c, points)
        lin = points @ a
        pen = np.abs(points) @ costs
        return 0.5 * lam * quad - lin + pen

    base = float(g_batch(w[None, :])[0])
    diffs = g_batch(w[None, :] + perturbations) - base
    return float(np.min(diffs))


def stock_level_linear_cost(
    prices,
    shares_traded,
    per_share_costs,
    uniform_cost: float,
) -> StockCostComparison:
    """Compare exact stock-level linear costs against the L * D shortcut.

    ``prices`` is (N_S,) dollars per share, ``shares_traded`` is (N, N_S)
    unsigned shares per alpha and stock, ``per_share_costs`` is (N, N_S)
    dollars per share. The exact cost is sum_{i,A} cost_iA * shares_iA; the
    shortcut prices every trade at ``uniform_cost`` times its dollar value,
    i.e. uniform_cost * D with D the total dollars traded.
    """
    p = np.asarray(prices, dtype=float)
    q = np.atleast_2d(np.asarray(shares_traded, dtype=float))
    l = np.atleast_2d(np.asarray(per_share_costs, dtype=float))
    if q.shape != l.shape or q.shape[1] != p.shape[0]:
        raise DimensionMismatch(
            f"shares {q.shape}, costs {l.shape}, prices {p.shape} do not align"
        )
    if (q < 0).any() or (l < 0).any() or (p <= 0).any():
        raise InputError("prices must be positive; shares and costs non-negative")

    exact = float(np.sum(l * q))
    dollars = float(np.sum(q @ p))
    approx = uniform_cost * dollars
    gap = abs(exact - approx) / exact if exact > 0 else 0.0
    return StockCostComparison(
        exact_cost=exact, approx_cost=approx, relative_gap=gap, dollar_turnover=dollars
    )
