"""Core VAR model types, design construction, simulation, and stability.

A VAR(P) process over M series is

    z(t) = sum_p A_p z(t - p) + eps(t),    eps(t) ~ N(0, noise_std^2 I),

with coefficient matrices ``A_p`` of shape (M, M) where entry (j, i) is the
lag-p influence of series i on series j.

The regression view stacks the coefficients into an (M*P, M) matrix ``A``
with lag-major, series-minor row ordering: row p*M + i of column k holds the
lag-(p+1) influence of series i on series k.  This ordering is fixed across
the whole package.

Stability: the literature accepts transition (companion) matrices with
eigenvalue moduli up to 1, but a modulus of exactly 1 gives a non-stationary
process.  Simulation here requires spectral radius < ``STABILITY_MARGIN``
(0.95) to leave numerical headroom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericError, StabilityError

STABILITY_MARGIN = 0.95


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TimeSeriesMatrix:
    """A T x M sample: one row per time step, one column per series."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError(f"sample must be a 2-d T x M matrix, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise InvalidInputError("sample contains non-finite values")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def n_steps(self) -> int:
        return self.data.shape[0]

    @property
    def n_series(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class VarCoefficients:
    """Ordered lag matrices of a VAR(P) model, stored as a (P, M, M) array."""

    lags: np.ndarray

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=float)
        if lags.ndim != 3 or lags.shape[0] < 1 or lags.shape[1] != lags.shape[2]:
            raise InvalidInputError(
                f"coefficients must be P square M x M matrices, got shape {lags.shape}"
            )
        if not np.isfinite(lags).all():
            raise InvalidInputError("coefficients contain non-finite values")
        object.__setattr__(self, "lags", _readonly(lags))

    @property
    def order(self) -> int:
        return self.lags.shape[0]

    @property
    def n_series(self) -> int:
        return self.lags.shape[1]

    def stacked(self) -> np.ndarray:
        """Return the (M*P, M) regression matrix A (lag-major row order)."""
        return np.concatenate([lag.T for lag in self.lags], axis=0)

    @classmethod
    def from_stacked(cls, a: np.ndarray, order: int) -> "VarCoefficients":
        """Rebuild lag matrices from a stacked (M*P, M) regression matrix."""
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or order < 1 or a.shape[0] != order * a.shape[1]:
            raise InvalidInputError(
                f"stacked matrix of shape {a.shape} does not match order {order}"
            )
        m = a.shape[1]
        lags = np.stack([a[p * m : (p + 1) * m, :].T for p in range(order)])
        return cls(lags)


@dataclass(frozen=True, eq=False)
class DesignPair:
    """Lagged regression view (X, Y) of a sample, with Y ~= X A."""

    x: np.ndarray
    y: np.ndarray
    n_series: int
    order: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] < 1:
            raise InvalidInputError("X and Y must be 2-d with the same (positive) row count")
        if y.shape[1] != self.n_series or x.shape[1] != self.n_series * self.order:
            raise InvalidInputError(
                f"X/Y shapes {x.shape}/{y.shape} do not match M={self.n_series}, P={self.order}"
            )
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "y", _readonly(y))

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    def source_indices(self, i: int) -> np.ndarray:
        """Column indices of X holding all lags of source series i."""
        return np.arange(self.order) * self.n_series + i


@dataclass(frozen=True, eq=False)
class CompanionMatrix:
    """(M*P) x (M*P) block-companion (transition) matrix of a VAR(P)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise InvalidInputError(f"companion matrix must be square, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise InvalidInputError("companion matrix contains non-finite values")
        object.__setattr__(self, "data", _readonly(data))


def build_design(sample: TimeSeriesMatrix, order: int) -> DesignPair:
    """Build the lagged design (X, Y) from a sample.

    Row r of Y is z(P+r); row r of X concatenates z(P+r-1), ..., z(r), i.e.
    column block p (columns p*M ... (p+1)*M - 1, zero-based) holds the rows of
    the sample lagged by p+1.

    Raises
    ------
    InvalidInputError
        If ``order`` is not in [1, T-1].
    """
    if order < 1:
        raise InvalidInputError(f"order must be >= 1, got {order}")
    t, m = sample.n_steps, sample.n_series
    if order >= t:
        raise InvalidInputError(f"order {order} must be smaller than the sample length {t}")
    z = sample.data
    n = t - order
    x = np.empty((n, m * order))
    for p in range(1, order + 1):
        x[:, (p - 1) * m : p * m] = z[order - p : t - p]
    return DesignPair(x=x, y=z[order:t], n_series=m, order=order)


def companion(coeffs: VarCoefficients) -> CompanionMatrix:
    """Block-companion matrix: lag matrices across the top band, identity
    blocks on the sub-diagonal.  For P=1 this is just the lag-1 matrix."""
    p, m = coeffs.order, coeffs.n_series
    c = np.zeros((m * p, m * p))
    c[:m, :] = np.concatenate(list(coeffs.lags), axis=1)
    for b in range(p - 1):
        c[m * (b + 1) : m * (b + 2), m * b : m * (b + 1)] = np.eye(m)
    return CompanionMatrix(c)


def spectral_radius(comp: CompanionMatrix | np.ndarray) -> float:
    """Largest eigenvalue modulus of a (companion) matrix."""
    data = comp.data if isinstance(comp, CompanionMatrix) else np.asarray(comp, dtype=float)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise InvalidInputError("matrix contains non-finite values")
    try:
        eigvals = np.linalg.eigvals(data)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.abs(eigvals).max())


def burn_in_length(coeffs: VarCoefficients) -> int:
    """Number of initial simulation steps discarded before recording."""
    return 10 * coeffs.order * coeffs.n_series


def simulate_var(
    coeffs: VarCoefficients, steps: int, noise_std: float, rng_seed: int
) -> TimeSeriesMatrix:
    """Simulate a stable VAR(P) process.

    The initial P states are drawn from the innovation distribution
    N(0, noise_std^2 I) (zeros when ``noise_std`` is 0); a burn-in prefix of
    ``burn_in_length(coeffs)`` steps is discarded so transients do not leak
    into the output.  Deterministic given ``rng_seed``.

    Parameters
    ----------
    coeffs : VarCoefficients
        Generating system; its companion spectral radius must be below
        ``STABILITY_MARGIN``.
    steps : int
        Number of recorded time steps; must exceed the burn-in length.
    noise_std : float
        Innovation standard deviation (>= 0).
    rng_seed : int
        Seed for the innovation stream.

    Returns
    -------
    TimeSeriesMatrix
        Exactly ``steps`` rows, M columns.
    """
    if noise_std < 0 or not np.isfinite(noise_std):
        raise InvalidInputError(f"noise_std must be finite and >= 0, got {noise_std}")
    radius = spectral_radius(companion(coeffs))
    if radius >= STABILITY_MARGIN:
        raise StabilityError(
            f"spectral radius {radius:.6f} >= stability margin {STABILITY_MARGIN}"
        )
    burn = burn_in_length(coeffs)
    if steps <= burn:
        raise InvalidInputError(f"steps ({steps}) must exceed the burn-in length ({burn})")
    p, m = coeffs.order, coeffs.n_series
    rng = np.random.default_rng(rng_seed)
    total = p + burn + steps
    z = np.zeros((total, m))
    if noise_std > 0:
        z[:p] = rng.normal(0.0, noise_std, size=(p, m))
        innovations = rng.normal(0.0, noise_std, size=(total - p, m))
    else:
        innovations = np.zeros((total - p, m))
    lags = coeffs.lags
    for t in range(p, total):
        acc = innovations[t - p]
        for q in range(p):
            acc = acc + lags[q] @ z[t - 1 - q]
        z[t] = acc
    return TimeSeriesMatrix(z[total - steps :])
