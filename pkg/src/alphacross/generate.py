"""Deterministic synthetic instances for demos, tests and the CLI.

Each generator draws an alpha history, turnovers and labels from a seeded RNG
and records every parameter in a ground-truth dict so runs are reproducible
and auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import AlphaSet, validate_alpha_set


@dataclass(frozen=True)
class GeneratedInstance:
    alpha_set: AlphaSet
    truth: dict


def generate_instance(
    seed: int,
    num_streams: int,
    num_observations: int,
    num_factors: int = 0,
    uniform_corr: float | None = None,
    mean_range: tuple = (0.005, 0.05),
    vol_range: tuple = (0.01, 0.08),
    tau_range: tuple = (0.05, 1.5),
    negative_fraction: float = 0.2,
) -> GeneratedInstance:
    """Draw a synthetic alpha universe.

    ``num_observations`` is the number of history rows (M+1), at least 2.
    Exactly one correlation structure applies: ``uniform_corr`` draws from a
    constant-correlation Gaussian, ``num_factors`` > 0 from a factor model
    with unit-ish factor scales, otherwise streams are independent.
    """
    n, m1 = int(num_streams), int(num_observations)
    if n < 1 or m1 < 2:
        raise InputError("need num_streams >= 1 and num_observations >= 2")
    if uniform_corr is not None and num_factors > 0:
        raise InputError("choose uniform_corr or num_factors, not both")
    if uniform_corr is not None and not (-1.0 / max(n - 1, 1) < uniform_corr < 1.0):
        raise InputError(f"uniform_corr {uniform_corr} outside the valid range for N={n}")

    rng = np.random.default_rng(seed)
    mu = rng.uniform(*mean_range, size=n)
    flip = rng.random(n) < negative_fraction
    mu[flip] *= -1.0
    vols = rng.uniform(*vol_range, size=n)

    if uniform_corr is not None:
        rho = float(uniform_corr)
        corr = np.full((n, n), rho)
        np.fill_diagonal(corr, 1.0)
        chol = np.linalg.cholesky(corr * np.outer(vols, vols))
        noise = rng.standard_normal((m1, n)) @ chol.T
        structure = {"mode": "uniform", "rho": rho}
    elif num_factors > 0:
        f = int(num_factors)
        loadings = rng.normal(0.0, 1.0, size=(n, f)) * vols[:, None] / np.sqrt(f)
        spec_vol = vols * rng.uniform(0.3, 0.7, size=n)
        fac = rng.standard_normal((m1, f))
        noise = fac @ loadings.T + rng.standard_normal((m1, n)) * spec_vol
        structure = {
            "mode": "factor",
            "num_factors": f,
            "loadings": loadings.tolist(),
            "specific_vols": spec_vol.tolist(),
        }
    else:
        noise = rng.standard_normal((m1, n)) * vols
        structure = {"mode": "independent"}

    history = mu + noise
    turnovers = rng.uniform(*tau_range, size=n)
    labels = tuple(f"a{i + 1:02d}" for i in range(n))
    alpha_set = validate_alpha_set(history, turnovers, labels)

    truth = {
        "seed": int(seed),
        "num_streams": n,
        "num_observations": m1,
        "means": mu.tolist(),
        "vols": vols.tolist(),
        "turnovers": turnovers.tolist(),
        "labels": list(labels),
        "structure": structure,
    }
    return GeneratedInstance(alpha_set=alpha_set, truth=truth)
