"""VAR coefficient estimators: OLS, Ridge, Lasso, and Group Lasso.

All estimators decompose over the M target columns of the stacked coefficient
matrix, so each column is fit as an independent regression of y_k on X.

The sparse solvers minimise, per column,

    Lasso:        ||X a - y||^2 + lam * ||a||_1
    Group Lasso:  ||X a - y||^2 + lam * sum_g ||a_g||_2

by cyclic coordinate / block-coordinate descent on the Gram matrix, keeping
an active set of nonzero coordinates (groups) that is periodically rechecked
against the KKT activation bound.  A solve terminates only when both the
maximum coefficient change per sweep is below ``tol`` and the first-order
(KKT) residual is below half of the certified ``10 * tol`` bound, so every
returned solution carries a machine-checkable optimality certificate:

    active group g:    2 X_g^T (y - X a) = lam * a_g / ||a_g||_2   (+- 10 tol)
    inactive group g:  ||2 X_g^T (y - X a)||_2 <= lam + 10 tol

(with groups of size one this reduces to the Lasso subgradient conditions).

The Group Lasso penalty here is the penalized equivalent of an L_{1,2}-budget
constraint: sweeping lam traces the same solution family.  Groups collect
the P lags of one source series, so a causal influence is selected or
dropped jointly across all its lags; the P self-lag coefficients of the
target form one additional penalized group per column, which shrinks the
univariate dynamics without excluding them from the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceError,
    DegenerateDesignError,
    InvalidInputError,
    SingularDesignError,
)
from .var_core import DesignPair, VarCoefficients

DEFAULT_TOL = 1e-7
MAX_SWEEPS = 100_000
_CONDITION_LIMIT = 1e12

PATH_METHODS = ("lasso", "group_lasso")
CV_METHODS = ("ridge", "lasso", "group_lasso")


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Partition of the M*P coefficient rows by source series.

    For the column-k regression the group of source i collects the P rows
    holding all lag coefficients of series i; the group with i == k is the
    "diagonal" (self-lag) group of that column.
    """

    n_series: int
    order: int

    def __post_init__(self):
        if self.n_series < 1 or self.order < 1:
            raise InvalidInputError("n_series and order must be positive")

    @classmethod
    def for_design(cls, design: DesignPair) -> "GroupStructure":
        return cls(n_series=design.n_series, order=design.order)

    def source_group(self, i: int) -> np.ndarray:
        """Row indices of all lags of source series i (lag-major layout)."""
        return np.arange(self.order) * self.n_series + i

    def all_groups(self) -> list[np.ndarray]:
        return [self.source_group(i) for i in range(self.n_series)]


@dataclass(frozen=True, eq=False)
class FitResult:
    coeffs: VarCoefficients
    penalty: float
    objective_value: float
    iterations: int


def _as_matrix(design: DesignPair) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(design.x), np.asarray(design.y)


def _check_condition(x: np.ndarray) -> np.ndarray:
    s = scipy.linalg.svdvals(x)
    if s[-1] <= 0.0 or s[0] / s[-1] >= _CONDITION_LIMIT:
        raise SingularDesignError(
            f"design is singular or too ill-conditioned (condition number "
            f"{'inf' if s[-1] <= 0 else s[0] / s[-1]:.3g})"
        )
    return s


def ols_fit(design: DesignPair) -> VarCoefficients:
    """Exact least-squares fit of Y on X (all columns at once)."""
    x, y = _as_matrix(design)
    if x.shape[0] < x.shape[1]:
        raise SingularDesignError(
            f"{x.shape[0]} rows cannot determine {x.shape[1]} coefficients"
        )
    _check_condition(x)
    a, *_ = np.linalg.lstsq(x, y, rcond=None)
    return VarCoefficients.from_stacked(a, order=design.order)


def ridge_fit(design: DesignPair, penalty: float) -> FitResult:
    """Closed-form ridge solution (X^T X + lam I)^-1 X^T Y, column-wise."""
    if penalty < 0 or not np.isfinite(penalty):
        raise InvalidInputError(f"penalty must be finite and >= 0, got {penalty}")
    x, y = _as_matrix(design)
    if penalty == 0.0:
        _check_condition(x)
    gram = x.T @ x + penalty * np.eye(x.shape[1])
    try:
        factor = scipy.linalg.cho_factor(gram)
    except scipy.linalg.LinAlgError as exc:
        raise SingularDesignError(f"X^T X + lam I is not positive definite: {exc}") from exc
    a = scipy.linalg.cho_solve(factor, x.T @ y)
    objective = float(np.sum((x @ a - y) ** 2) + penalty * np.sum(a**2))
    return FitResult(
        coeffs=VarCoefficients.from_stacked(a, order=design.order),
        penalty=float(penalty),
        objective_value=objective,
        iterations=0,
    )


_kernels = None


def _jit_kernels():
    # Deferred so that importing the package does not pay the numba start-up
    # cost; the first solver call does (compiled code is cached on disk).
    global _kernels
    if _kernels is None:
        from . import _kernels as kernels

        _kernels = kernels
    return _kernels


class _LassoEngine:
    """Gram-based cyclic coordinate descent for one design, any column."""

    def __init__(self, x: np.ndarray):
        self.gram = np.ascontiguousarray(x.T @ x)
        self.gdiag = np.ascontiguousarray(np.diag(self.gram))

    def solve(self, c, yy, lam, tol, alpha=None, max_sweeps=MAX_SWEEPS):
        alpha = np.zeros(len(c)) if alpha is None else alpha.copy()
        sweeps, status = _jit_kernels().lasso_solve(
            self.gram, self.gdiag, np.ascontiguousarray(c), lam, tol, 5.0 * tol, alpha, max_sweeps
        )
        if status != 0:
            raise ConvergenceError(f"lasso did not converge within {max_sweeps} sweeps")
        return alpha, sweeps


class _GroupLassoEngine:
    """Block-coordinate descent with exact per-group minimisation.

    Each group subproblem min ||X_g b - r||^2 + lam ||b||_2 is solved in the
    eigenbasis of X_g^T X_g by a safeguarded Newton iteration on the norm of
    the solution.
    """

    def __init__(self, x: np.ndarray, groups: Sequence[np.ndarray]):
        d = x.shape[1]
        group_arrays = [np.asarray(g, dtype=np.int64) for g in groups]
        flat = np.concatenate(group_arrays) if group_arrays else np.zeros(0, dtype=np.int64)
        if len(flat) != d or not np.array_equal(np.sort(flat), np.arange(d)):
            raise InvalidInputError("groups must partition the design columns")
        self.gram = np.ascontiguousarray(x.T @ x)
        self.groups = group_arrays
        sizes = np.array([len(g) for g in group_arrays], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.indices = flat
        self.eoffsets = np.concatenate([[0], np.cumsum(sizes**2)])
        self.evals = np.empty(d)
        self.evecs = np.empty(int(np.sum(sizes**2)))
        for gi, g in enumerate(group_arrays):
            evals, evecs = np.linalg.eigh(self.gram[np.ix_(g, g)])
            self.evals[self.offsets[gi] : self.offsets[gi + 1]] = np.maximum(evals, 0.0)
            self.evecs[self.eoffsets[gi] : self.eoffsets[gi + 1]] = evecs.ravel()

    def solve(self, c, yy, lam, tol, alpha=None, max_sweeps=MAX_SWEEPS):
        alpha = np.zeros(len(c)) if alpha is None else alpha.copy()
        sweeps, status = _jit_kernels().group_solve(
            self.gram,
            np.ascontiguousarray(c),
            yy,
            lam,
            tol,
            5.0 * tol,
            alpha,
            self.offsets,
            self.indices,
            self.evals,
            self.evecs,
            self.eoffsets,
            max_sweeps,
        )
        if status == 2:
            raise AssertionError("block-coordinate sweep increased the objective")
        if status != 0:
            raise ConvergenceError(f"group lasso did not converge within {max_sweeps} sweeps")
        return alpha, sweeps


def _column_targets(x: np.ndarray, y: np.ndarray):
    cs = x.T @ y
    yys = np.sum(y**2, axis=0)
    return [(cs[:, k], float(yys[k])) for k in range(y.shape[1])]


def _fit_result(design, a, penalty, objective, sweeps):
    return FitResult(
        coeffs=VarCoefficients.from_stacked(a, order=design.order),
        penalty=float(penalty),
        objective_value=float(objective),
        iterations=int(sweeps),
    )


def _lasso_objective(x, y, a, lam):
    return float(np.sum((x @ a - y) ** 2) + lam * np.sum(np.abs(a)))


def _group_objective(x, y, a, lam, groups):
    penalty = sum(
        np.linalg.norm(a[g, k]) for k in range(a.shape[1]) for g in groups
    )
    return float(np.sum((x @ a - y) ** 2) + lam * penalty)


def lasso_fit(design: DesignPair, penalty: float, tol: float = DEFAULT_TOL) -> FitResult:
    """L1-penalized fit by cyclic coordinate descent, per column."""
    if not penalty > 0:
        raise InvalidInputError(f"penalty must be positive, got {penalty}")
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    x, y = _as_matrix(design)
    engine = _LassoEngine(x)
    a = np.zeros((x.shape[1], y.shape[1]))
    sweeps = 0
    for k, (c, yy) in enumerate(_column_targets(x, y)):
        a[:, k], used = engine.solve(c, yy, penalty, tol)
        sweeps += used
    return _fit_result(design, a, penalty, _lasso_objective(x, y, a, penalty), sweeps)


def group_lasso_fit(
    design: DesignPair, groups: GroupStructure, penalty: float, tol: float = DEFAULT_TOL
) -> FitResult:
    """L_{1,2}-penalized fit by block-coordinate descent over source groups."""
    if not penalty > 0:
        raise InvalidInputError(f"penalty must be positive, got {penalty}")
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    if groups.n_series != design.n_series or groups.order != design.order:
        raise InvalidInputError("group structure does not match the design")
    x, y = _as_matrix(design)
    group_list = groups.all_groups()
    engine = _GroupLassoEngine(x, group_list)
    a = np.zeros((x.shape[1], y.shape[1]))
    sweeps = 0
    for k, (c, yy) in enumerate(_column_targets(x, y)):
        a[:, k], used = engine.solve(c, yy, penalty, tol)
        sweeps += used
    return _fit_result(design, a, penalty, _group_objective(x, y, a, penalty, group_list), sweeps)


def solve_lasso(
    x: np.ndarray, y: np.ndarray, penalty: float, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Single-response lasso solve (exposed for oracle comparisons)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    alpha, _ = _LassoEngine(x).solve(x.T @ y, float(y @ y), penalty, tol)
    return alpha


def solve_group_lasso(
    x: np.ndarray,
    y: np.ndarray,
    groups: Sequence[np.ndarray],
    penalty: float,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Single-response group-lasso solve over an arbitrary column partition."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    engine = _GroupLassoEngine(x, groups)
    alpha, _ = engine.solve(x.T @ y, float(y @ y), penalty, tol)
    return alpha


def lasso_lambda_max(design: DesignPair) -> float:
    """Smallest penalty for which the lasso solution is all-zero."""
    x, y = _as_matrix(design)
    return float(2.0 * np.max(np.abs(x.T @ y)))


def group_lambda_max(design: DesignPair, groups: GroupStructure) -> float:
    """Smallest penalty for which every penalized group is zero."""
    x, y = _as_matrix(design)
    c = x.T @ y
    return float(
        2.0 * max(np.linalg.norm(c[g, k]) for g in groups.all_groups() for k in range(y.shape[1]))
    )


def regularization_path(
    design: DesignPair, method: str, n_points: int, tol: float = DEFAULT_TOL
) -> list[FitResult]:
    """Trace n_points solutions, log-spaced on [1e-4 * lam_max, lam_max].

    Fitting proceeds from the dense end upward with warm starts; the returned
    list is ordered by decreasing penalty, so the first entry has an all-zero
    penalized support.
    """
    if method not in PATH_METHODS:
        raise InvalidInputError(f"method must be one of {PATH_METHODS}, got {method!r}")
    if n_points < 2:
        raise InvalidInputError(f"n_points must be >= 2, got {n_points}")
    x, y = _as_matrix(design)
    if method == "lasso":
        lam_max = lasso_lambda_max(design)
        engine = _LassoEngine(x)
        group_list = None
    else:
        structure = GroupStructure.for_design(design)
        lam_max = group_lambda_max(design, structure)
        group_list = structure.all_groups()
        engine = _GroupLassoEngine(x, group_list)
    if lam_max <= 0.0:
        raise DegenerateDesignError("lambda_max is zero; the response is orthogonal to X")
    grid = np.geomspace(lam_max * 1e-4, lam_max, n_points)
    d, m = x.shape[1], y.shape[1]
    coefs = np.zeros((n_points, d, m))
    sweeps = np.zeros(n_points, dtype=int)
    # Seed the dense end near the least-squares solution; descent from a cold
    # start at the smallest penalty is by far the slowest part of the path.
    gram_reg = engine.gram + (1e-10 * np.trace(engine.gram) + 1e-12) * np.eye(d)
    for k, (c, yy) in enumerate(_column_targets(x, y)):
        warm = np.linalg.solve(gram_reg, c)
        for li, lam in enumerate(grid):
            warm, used = engine.solve(c, yy, lam, tol, alpha=warm)
            coefs[li, :, k] = warm
            sweeps[li] += used
    results = []
    for li in range(n_points - 1, -1, -1):
        lam = float(grid[li])
        a = coefs[li]
        if method == "lasso":
            objective = _lasso_objective(x, y, a, lam)
        else:
            objective = _group_objective(x, y, a, lam, group_list)
        results.append(_fit_result(design, a, lam, objective, sweeps[li]))
    return results


def cv_grid(design: DesignPair, method: str, n_points: int) -> np.ndarray:
    """Default cross-validation grid: log-spaced below lambda_max for the
    sparse methods, spanning the squared singular-value range for ridge."""
    if n_points < 1:
        raise InvalidInputError("n_points must be >= 1")
    if method == "ridge":
        smax = float(scipy.linalg.svdvals(np.asarray(design.x))[0])
        top = smax**2
        return np.geomspace(top * 1e-7, top * 10.0, n_points)
    if method == "lasso":
        lam_max = lasso_lambda_max(design)
    elif method == "group_lasso":
        lam_max = group_lambda_max(design, GroupStructure.for_design(design))
    else:
        raise InvalidInputError(f"method must be one of {CV_METHODS}, got {method!r}")
    if lam_max <= 0.0:
        raise DegenerateDesignError("lambda_max is zero; the response is orthogonal to X")
    return np.geomspace(lam_max * 1e-4, lam_max, n_points)


def cross_validate(
    design: DesignPair,
    method: str,
    folds: int,
    grid: Sequence[float],
    tol: float = DEFAULT_TOL,
) -> float:
    """Pick the penalty minimising mean held-out squared prediction error.

    Folds are contiguous blocks of design rows (time-respecting); ties are
    broken toward the larger penalty.
    """
    if method not in CV_METHODS:
        raise InvalidInputError(f"method must be one of {CV_METHODS}, got {method!r}")
    if folds < 2:
        raise InvalidInputError(f"folds must be >= 2, got {folds}")
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise InvalidInputError("penalty grid must be nonempty")
    x, y = _as_matrix(design)
    n = x.shape[0]
    if n < folds:
        raise InvalidInputError(f"cannot split {n} rows into {folds} nonempty folds")
    blocks = np.array_split(np.arange(n), folds)
    order = np.argsort(grid)[::-1]  # descending: warm starts shrink support first
    errors = np.zeros((folds, grid.size))
    for fi, block in enumerate(blocks):
        train = np.setdiff1d(np.arange(n), block, assume_unique=True)
        x_tr, y_tr = x[train], y[train]
        x_te, y_te = x[block], y[block]
        if method == "ridge":
            gram = x_tr.T @ x_tr
            cmat = x_tr.T @ y_tr
            eye = np.eye(x.shape[1])
            for gi in order:
                a = np.linalg.solve(gram + grid[gi] * eye, cmat)
                errors[fi, gi] = np.mean((x_te @ a - y_te) ** 2)
        else:
            if method == "lasso":
                engine = _LassoEngine(x_tr)
            else:
                structure = GroupStructure.for_design(design)
                engine = _GroupLassoEngine(x_tr, structure.all_groups())
            targets = _column_targets(x_tr, y_tr)
            a = np.zeros((x.shape[1], y.shape[1]))
            warm = [None] * y.shape[1]
            for gi in order:
                for k, (c, yy) in enumerate(targets):
                    warm[k], _ = engine.solve(c, yy, grid[gi], tol, alpha=warm[k])
                    a[:, k] = warm[k]
                errors[fi, gi] = np.mean((x_te @ a - y_te) ** 2)
    mean_errors = errors.mean(axis=0)
    best = order[0]
    for gi in order:
        if mean_errors[gi] < mean_errors[best]:
            best = gi
    return float(grid[best])
