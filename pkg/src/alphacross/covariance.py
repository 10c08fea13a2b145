"""Sample covariance estimation and factor-model risk representations.

The factor form used everywhere downstream is

    Gamma = diag(xi_i^2) + W W'

with W the N x F loadings carrying the factor covariance already absorbed
(W = Omega @ cholesky(Phi)). Restricting a factor model to a sub-universe is
exact: drop rows of W and entries of xi^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IndefiniteCovariance,
    InputError,
    MissingValues,
    NotPositiveDefinite,
    RankDeficient,
    ZeroVarianceStream,
)

# Eigenvalues below RANK_RTOL * e_max are rounding-distorted zeros, not factors.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class CovEstimate:
    """Sample covariance with its correlation and eigen-decomposition.

    ``eigenvalues`` are sorted descending; ``eigenvectors`` holds the matching
    orthonormal columns with a deterministic sign convention (largest-magnitude
    entry positive). ``rank_estimate`` counts eigenvalues above the rounding
    tolerance.
    """

    cov: np.ndarray
    vols: np.ndarray
    corr: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank_estimate: int

    @property
    def num_streams(self) -> int:
        return self.cov.shape[0]


@dataclass(frozen=True)
class FactorModel:
    """Diagonal specific risk plus combined factor loadings.

    ``specific_var`` holds xi_i^2 > 0; ``loadings`` is N x F with the factor
    covariance absorbed, so the implied covariance is
    ``diag(specific_var) + loadings @ loadings.T``.
    """

    specific_var: np.ndarray
    loadings: np.ndarray
    provenance: str = "user-supplied"

    def __post_init__(self):
        sv = np.asarray(self.specific_var, dtype=float)
        ld = np.asarray(self.loadings, dtype=float)
        if ld.ndim == 1:
            ld = ld.reshape(-1, 1)
        if sv.ndim != 1:
            raise DimensionMismatch("specific_var must be a vector")
        if ld.shape[0] != sv.shape[0]:
            raise DimensionMismatch(
                f"loadings rows ({ld.shape[0]}) must match specific_var length ({sv.shape[0]})"
            )
        if not (sv > 0).all():
            raise InputError("all specific variances must be strictly positive")
        object.__setattr__(self, "specific_var", sv)
        object.__setattr__(self, "loadings", ld)
        sv.flags.writeable = False
        ld.flags.writeable = False

    @property
    def num_streams(self) -> int:
        return self.specific_var.shape[0]

    @property
    def num_factors(self) -> int:
        return self.loadings.shape[1]

    def implied_covariance(self) -> np.ndarray:
        """Dense N x N covariance implied by the factor form."""
        return np.diag(self.specific_var) + self.loadings @ self.loadings.T

    def restrict(self, indices) -> "FactorModel":
        idx = list(indices)
        return FactorModel(
            specific_var=self.specific_var[idx],
            loadings=self.loadings[idx, :],
            provenance=self.provenance,
        )

    @classmethod
    def diagonal(cls, specific_var) -> "FactorModel":
        """Factor-free model: pure specific risk."""
        sv = np.asarray(specific_var, dtype=float)
        return cls(specific_var=sv, loadings=np.zeros((sv.shape[0], 0)))


def _ordered_eigh(matrix: np.ndarray):
    """Descending eigenvalues with sign-fixed eigenvectors.

    Each eigenvector is flipped so its largest-magnitude entry is positive
    (first such index on ties), making degenerate spectra reproducible.
    """
    evals, evecs = np.linalg.eigh(matrix)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    for k in range(evecs.shape[1]):
        col = evecs[:, k]
        pivot = int(np.argmax(np.abs(col)))
        if col[pivot] < 0:
            evecs[:, k] = -col
    return evals, evecs


def sample_covariance(history) -> CovEstimate:
    """Unbiased sample covariance of stream histories with eigen data attached.

    Parameters
    ----------
    history : (M+1, N) array-like
        At least two observations per stream, no missing values.

    Raises
    ------
    MissingValues, InputError
        On non-finite cells or fewer than two observations.
    ZeroVarianceStream
        If any stream is constant (its correlation row is undefined).
    IndefiniteCovariance
        Negative eigenvalues beyond rounding tolerance; with clean inputs this
        cannot happen, so it signals corrupt data upstream.
    """
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 2:
        raise DimensionMismatch(f"history must be 2-dimensional, got shape {hist.shape}")
    if not np.isfinite(hist).all():
        raise MissingValues("history contains missing/non-finite cells")
    if hist.shape[0] < 2:
        raise InputError("need at least two observations to estimate covariance")

    # Constant columns (range exactly zero) have zero variance by definition;
    # checking the range avoids calling rounding dust a positive variance.
    col_range = hist.max(axis=0) - hist.min(axis=0)
    if (col_range == 0.0).any():
        i = int(np.argmin(col_range))
        raise ZeroVarianceStream(f"stream at column {i} is constant; correlation undefined")

    cov = np.cov(hist, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    cov = 0.5 * (cov + cov.T)
    vols = np.sqrt(np.diag(cov))
    corr = cov / np.outer(vols, vols)
    np.fill_diagonal(corr, 1.0)
    corr = 0.5 * (corr + corr.T)

    evals, evecs = _ordered_eigh(cov)
    e_max = float(evals[0])
    if e_max <= 0.0:
        raise IndefiniteCovariance("largest covariance eigenvalue is non-positive")
    tol = RANK_RTOL * e_max
    if float(evals[-1]) < -tol:
        raise IndefiniteCovariance(
            f"covariance has eigenvalue {evals[-1]:.3e} below -{tol:.3e}; "
            "inputs look corrupt (no deformation is attempted)"
        )
    rank = int(np.sum(evals > tol))

    cov.flags.writeable = False
    vols.flags.writeable = False
    corr.flags.writeable = False
    evals.flags.writeable = False
    evecs.flags.writeable = False
    return CovEstimate(
        cov=cov,
        vols=vols,
        corr=corr,
        eigenvalues=evals,
        eigenvectors=evecs,
        rank_estimate=rank,
    )


def cholesky_factor(phi) -> np.ndarray:
    """Lower-triangular G with G G' = phi.

    Raises
    ------
    InputError
        If phi is not symmetric.
    NotPositiveDefinite
        If phi has non-positive eigenvalues; no deformation is attempted.
    """
    p = np.atleast_2d(np.asarray(phi, dtype=float))
    if p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"factor covariance must be square, got {p.shape}")
    if p.size and not np.allclose(p, p.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(p).max())):
        raise InputError("factor covariance must be symmetric")
    try:
        return np.linalg.cholesky(p)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"factor covariance is not positive-definite: {exc}") from exc


def build_factor_model(omega, phi, xi2) -> FactorModel:
    """Absorb the factor covariance into the loadings.

    Given raw loadings omega (N x F), factor covariance phi (F x F, positive-
    definite) and specific variances xi2 (> 0), returns the model whose implied
    covariance equals diag(xi2) + omega @ phi @ omega.T.
    """
    om = np.asarray(omega, dtype=float)
    if om.ndim == 1:
        om = om.reshape(-1, 1)
    p = np.atleast_2d(np.asarray(phi, dtype=float))
    if om.shape[1] != p.shape[0]:
        raise DimensionMismatch(
            f"omega has {om.shape[1]} factor columns but phi is {p.shape[0]} x {p.shape[1]}"
        )
    chol = cholesky_factor(p)
    return FactorModel(specific_var=np.asarray(xi2, dtype=float), loadings=om @ chol)


def pca_factor_model(cov: CovEstimate, num_factors: int) -> FactorModel:
    """Factor model from the leading principal components of a covariance.

    Loadings are sqrt(e_A) times the A-th eigenvector for the top
    ``num_factors`` eigenvalues, so the loadings alone reproduce the rank-F
    spectral truncation of the covariance. Specific variance is the covariance
    diagonal (guaranteed positive); note the implied total variance then
    overstates the diagonal by the explained part.

    Raises
    ------
    RankDeficient
        If ``num_factors`` exceeds the rank estimate.
    """
    f = int(num_factors)
    if f < 0:
        raise InputError("num_factors must be >= 0")
    if f > cov.rank_estimate:
        raise RankDeficient(
            f"requested {f} factors but covariance rank estimate is {cov.rank_estimate}"
        )
    loadings = cov.eigenvectors[:, :f] * np.sqrt(cov.eigenvalues[:f])
    return FactorModel(
        specific_var=np.diag(cov.cov).copy(),
        loadings=loadings,
        provenance="pca-derived",
    )
