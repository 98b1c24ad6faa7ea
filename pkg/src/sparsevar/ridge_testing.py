"""Simultaneous significance testing of ridge-estimated VAR coefficients.

Under the column-k null hypothesis (no influence on series k at all), the
ridge coefficient vector is approximately Gaussian with covariance

    sigma_k^2 * Sigma,   Sigma = (X^T X + lam I)^-1 X^T X (X^T X + lam I)^-1,

where sigma_k^2 is estimated from the smoother residual as
||y_k - H y_k||^2 / trace((I - H)(I - H^T)) with H = X (X^T X + lam I)^-1 X^T.
Dividing each coefficient by its null standard deviation gives normalized
statistics whose joint null distribution is N(0, R) with the correlation
matrix R derived from Sigma.

Single-step max-t adjusted p-values follow as p_i = 1 - g(R, |stat_i|) where
g(R, t) is the probability that a N(0, R) vector stays inside the centered
cube [-t, t]^d.  That rectangle probability is estimated by the Genz
separation-of-variables Monte Carlo transform; all statistics of one column
share one random stream, which makes the p-values exactly monotone in the
statistic magnitudes.

Testing is per target column: the MP hypotheses of one column form one
simultaneous family.  The trace term is computed from the spectrum of
X^T X -- never by materialising the (T-P) x (T-P) smoother matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import ndtr, ndtri

from .errors import DegenerateDesignError, InvalidCorrelationError, InvalidInputError
from .seeds import mix64
from .var_core import DesignPair

DEFAULT_MC_SAMPLES = 50_000


@dataclass(frozen=True, eq=False)
class TestReport:
    """Per-column normalized statistics and max-t adjusted p-values.

    ``statistics`` and ``p_adjusted`` are (M*P, M): column k holds the
    statistics of target series k in the lag-major row layout of the stacked
    coefficient matrix.  ``correlation`` is shared by all columns.
    """

    statistics: np.ndarray
    p_adjusted: np.ndarray
    sigma_sq: np.ndarray
    correlation: np.ndarray

    def __post_init__(self):
        stats = np.asarray(self.statistics, dtype=float)
        pvals = np.asarray(self.p_adjusted, dtype=float)
        sigma = np.asarray(self.sigma_sq, dtype=float)
        corr = np.asarray(self.correlation, dtype=float)
        if stats.ndim != 2 or pvals.shape != stats.shape:
            raise InvalidInputError("statistics and p_adjusted must share an (MP, M) shape")
        if np.any(pvals < 0.0) or np.any(pvals > 1.0):
            raise InvalidInputError("adjusted p-values must lie in [0, 1]")
        if np.any(sigma < 0.0):
            raise InvalidInputError("variance estimates must be nonnegative")
        _validate_correlation(corr)
        for name, value in (
            ("statistics", stats),
            ("p_adjusted", pvals),
            ("sigma_sq", sigma),
            ("correlation", corr),
        ):
            value = value.copy()
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_series(self) -> int:
        return self.statistics.shape[1]

    @property
    def order(self) -> int:
        return self.statistics.shape[0] // self.statistics.shape[1]


def _validate_correlation(r: np.ndarray):
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise InvalidCorrelationError(f"correlation matrix must be square, got shape {r.shape}")
    if not np.isfinite(r).all():
        raise InvalidCorrelationError("correlation matrix contains non-finite values")
    if np.max(np.abs(r - r.T)) > 1e-8:
        raise InvalidCorrelationError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(r) - 1.0)) > 1e-8:
        raise InvalidCorrelationError("correlation matrix diagonal must be 1")
    if np.max(np.abs(r)) > 1.0 + 1e-8:
        raise InvalidCorrelationError("correlation entries must lie in [-1, 1]")


def _gram_spectrum(design: DesignPair):
    gram = design.x.T @ design.x
    evals, evecs = np.linalg.eigh(gram)
    return np.maximum(evals, 0.0), evecs


def ridge_covariance(design: DesignPair, penalty: float) -> tuple[np.ndarray, float]:
    """Null covariance shape Sigma of the ridge coefficients and the trace
    term trace((I - H)(I - H^T)) of the smoother, computed spectrally.

    With singular values s_j of X the trace equals
    n - 2 sum_j h_j + sum_j h_j^2 where h_j = s_j^2 / (s_j^2 + lam).
    """
    if not penalty > 0:
        raise InvalidInputError(f"penalty must be positive, got {penalty}")
    evals, evecs = _gram_spectrum(design)
    shrunk = evals / (evals + penalty) ** 2
    sigma = (evecs * shrunk) @ evecs.T
    h = evals / (evals + penalty)
    trace = design.n_rows - 2.0 * h.sum() + (h**2).sum()
    return sigma, float(trace)


def estimate_sigma(design: DesignPair, penalty: float, k: int) -> float:
    """Model variance estimate for target column k (residual over trace)."""
    if not penalty > 0:
        raise InvalidInputError(f"penalty must be positive, got {penalty}")
    if not 0 <= k < design.n_series:
        raise InvalidInputError(f"column index {k} out of range for M={design.n_series}")
    x = design.x
    y_k = design.y[:, k]
    gram = x.T @ x + penalty * np.eye(x.shape[1])
    w = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), x.T @ y_k)
    residual = y_k - x @ w
    _, trace = ridge_covariance(design, penalty)
    if trace < 1e-12:
        raise DegenerateDesignError("smoother trace term is numerically zero")
    return float(residual @ residual / trace)


def normalized_statistics(
    coeffs_col: np.ndarray, sigma: np.ndarray, sigma_sq: float
) -> tuple[np.ndarray, np.ndarray]:
    """Standardize one coefficient column and derive the correlation matrix
    R_ij = Sigma_ij / sqrt(Sigma_ii Sigma_jj) of the null distribution."""
    coeffs_col = np.asarray(coeffs_col, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    diag = np.diag(sigma)
    if np.any(diag <= 0.0):
        raise DegenerateDesignError("covariance diagonal must be positive")
    if not sigma_sq > 0:
        raise DegenerateDesignError(f"sigma_sq must be positive, got {sigma_sq}")
    scale = np.sqrt(diag)
    stats = coeffs_col / (np.sqrt(sigma_sq) * scale)
    corr = sigma / np.outer(scale, scale)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return stats, corr


def _correlation_factor(r: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of R after silent PSD repair (eigenvalues
    clipped at 1e-10); genuinely indefinite input is rejected."""
    _validate_correlation(r)
    evals, evecs = np.linalg.eigh(r)
    if evals.min() < -1e-8:
        raise InvalidCorrelationError(
            f"correlation matrix is not PSD (smallest eigenvalue {evals.min():.3g})"
        )
    repaired = (evecs * np.maximum(evals, 1e-10)) @ evecs.T
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            return np.linalg.cholesky(repaired + jitter * np.eye(len(r)))
        except np.linalg.LinAlgError:
            continue
    raise InvalidCorrelationError("could not factor the repaired correlation matrix")


def mvn_rectangle_prob(
    r: np.ndarray,
    t: float,
    n_samples: int = DEFAULT_MC_SAMPLES,
    rng_seed: int = 0,
) -> tuple[float, float]:
    """Estimate P(max_i |v_i| <= t) for v ~ N(0, R).

    Uses the Genz separation-of-variables transform: conditionally on the
    previous coordinates each level contributes a Gaussian interval
    probability, and the product over levels is averaged over uniform
    samples.  Returns (estimate, standard error); both are exact for d = 1.
    """
    if t < 0 or not np.isfinite(t):
        raise InvalidInputError(f"t must be finite and >= 0, got {t}")
    if n_samples < 2:
        raise InvalidInputError("n_samples must be >= 2")
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        r = r.reshape(1, 1)
    lower = _correlation_factor(r)
    d = r.shape[0]
    if t == 0.0:
        return 0.0, 0.0
    l00 = max(lower[0, 0], 1e-12)
    d_prev = ndtr(-t / l00)
    e_prev = ndtr(t / l00)
    if d == 1:
        return float(np.clip(e_prev - d_prev, 0.0, 1.0)), 0.0
    rng = np.random.default_rng(rng_seed)
    w = rng.random((n_samples, d - 1))
    f = np.full(n_samples, e_prev - d_prev)
    dcur = np.full(n_samples, d_prev)
    ecur = np.full(n_samples, e_prev)
    y = np.empty((n_samples, d - 1))
    for i in range(1, d):
        quantile = dcur + w[:, i - 1] * (ecur - dcur)
        y[:, i - 1] = ndtri(np.clip(quantile, 1e-15, 1.0 - 1e-15))
        mu = y[:, :i] @ lower[i, :i]
        lii = max(lower[i, i], 1e-12)
        dcur = ndtr((-t - mu) / lii)
        ecur = ndtr((t - mu) / lii)
        f *= ecur - dcur
    estimate = float(f.mean())
    stderr = float(f.std(ddof=1) / np.sqrt(n_samples))
    return min(max(estimate, 0.0), 1.0), stderr


def _pvalues_with_error(stats, r, n_samples, rng_seed):
    stats = np.asarray(stats, dtype=float)
    pvals = np.empty(stats.shape)
    se_max = 0.0
    for i, value in enumerate(stats):
        prob, se = mvn_rectangle_prob(r, abs(float(value)), n_samples, rng_seed)
        pvals[i] = 1.0 - prob
        se_max = max(se_max, se)
    return np.clip(pvals, 0.0, 1.0), se_max


def adjusted_pvalues(
    stats: np.ndarray,
    r: np.ndarray,
    n_samples: int = DEFAULT_MC_SAMPLES,
    rng_seed: int = 0,
) -> np.ndarray:
    """Max-t adjusted p-values p_i = 1 - g(R, |stat_i|).

    All entries share one random stream (the same seed), so the p-values are
    exactly non-increasing in |stat_i| despite the Monte Carlo estimation.
    """
    pvals, _ = _pvalues_with_error(stats, r, n_samples, rng_seed)
    return pvals


def build_test_report(
    design: DesignPair,
    penalty: float,
    n_samples: int = DEFAULT_MC_SAMPLES,
    rng_seed: int = 0,
) -> tuple[TestReport, float]:
    """Run the full per-column testing pipeline at one ridge penalty.

    Returns the report and the largest Monte Carlo standard error observed
    across all rectangle probabilities.
    """
    from .estimators import ridge_fit

    coeffs = ridge_fit(design, penalty).coeffs.stacked()
    sigma, trace = ridge_covariance(design, penalty)
    if trace < 1e-12:
        raise DegenerateDesignError("smoother trace term is numerically zero")
    x, y = design.x, design.y
    gram = x.T @ x + penalty * np.eye(x.shape[1])
    factor = scipy.linalg.cho_factor(gram)
    m = design.n_series
    statistics = np.empty_like(coeffs)
    p_adjusted = np.empty_like(coeffs)
    sigma_sq = np.empty(m)
    corr = None
    se_max = 0.0
    for k in range(m):
        y_k = y[:, k]
        residual = y_k - x @ scipy.linalg.cho_solve(factor, x.T @ y_k)
        sigma_sq[k] = residual @ residual / trace
        if not sigma_sq[k] > 0:
            raise DegenerateDesignError(f"zero residual variance for column {k}")
        statistics[:, k], corr = normalized_statistics(coeffs[:, k], sigma, sigma_sq[k])
        p_adjusted[:, k], se = _pvalues_with_error(
            statistics[:, k], corr, n_samples, mix64(rng_seed, k)
        )
        se_max = max(se_max, se)
    report = TestReport(
        statistics=statistics, p_adjusted=p_adjusted, sigma_sq=sigma_sq, correlation=corr
    )
    return report, se_max
