import itertools

import numpy as np
import pytest

from sparsevar.errors import InvalidInputError, SingularDesignError
from sparsevar.estimators import (
    GroupStructure,
    cross_validate,
    cv_grid,
    group_lambda_max,
    group_lasso_fit,
    lasso_fit,
    lasso_lambda_max,
    ols_fit,
    regularization_path,
    ridge_fit,
    solve_group_lasso,
    solve_lasso,
)
from sparsevar.sim_bench import BenchmarkConfig, make_instance
from sparsevar.var_core import DesignPair, TimeSeriesMatrix, VarCoefficients, build_design, simulate_var


def design_from_arrays(x, y, order=1):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    m = y.shape[1]
    assert x.shape[1] % m == 0
    return DesignPair(x=x, y=y, n_series=m, order=x.shape[1] // m)


def lasso_enumeration_oracle(x, y, lam):
    """Global lasso optimum by exhaustive sign-pattern QP enumeration."""
    d = x.shape[1]
    best_obj = np.inf
    best = None
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=d):
        s = np.array(signs)
        support = np.flatnonzero(s)
        a = np.zeros(d)
        if support.size:
            xs = x[:, support]
            try:
                a[support] = np.linalg.solve(
                    xs.T @ xs, xs.T @ y - 0.5 * lam * s[support]
                )
            except np.linalg.LinAlgError:
                continue
        obj = np.sum((x @ a - y) ** 2) + lam * np.sum(np.abs(a))
        if obj < best_obj:
            best_obj, best = obj, a
    return best, best_obj


def group_prox_oracle(x, y, groups, lam, tol=1e-9, max_iter=500_000):
    """Independent accelerated proximal-gradient reference solver."""
    lip = 2.0 * np.linalg.norm(x, 2) ** 2
    a = np.zeros(x.shape[1])
    z = a.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = 2.0 * x.T @ (x @ z - y)
        v = z - grad / lip
        a_new = v.copy()
        for g in groups:
            norm = np.linalg.norm(v[g])
            a_new[g] = 0.0 if norm <= lam / lip else v[g] * (1.0 - lam / (lip * norm))
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = a_new + ((t - 1.0) / t_new) * (a_new - a)
        if np.max(np.abs(a_new - a)) < tol:
            return a_new
        a, t = a_new, t_new
    return a


def group_objective(x, y, a, lam, groups):
    return np.sum((x @ a - y) ** 2) + lam * sum(np.linalg.norm(a[g]) for g in groups)


class TestOls:
    def test_identity_design(self):
        y = np.array([[2.0], [4.0]])
        coeffs = ols_fit(design_from_arrays(np.eye(2), y, order=2))
        assert np.allclose(coeffs.stacked(), y.reshape(2, 1) * 0 + [[2.0], [4.0]])

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(0)
        truth = VarCoefficients(0.2 * rng.normal(size=(2, 3, 3)))
        sample = simulate_var(truth, steps=1000, noise_std=1.0, rng_seed=1)
        design = build_design(sample, order=2)
        noiseless = DesignPair(
            x=design.x, y=design.x @ truth.stacked(), n_series=3, order=2
        )
        recovered = ols_fit(noiseless)
        assert np.max(np.abs(recovered.stacked() - truth.stacked())) < 1e-6

    def test_duplicate_column_is_singular(self):
        rng = np.random.default_rng(1)
        col = rng.normal(size=(6, 1))
        x = np.hstack([col, col])
        with pytest.raises(SingularDesignError):
            ols_fit(design_from_arrays(x, rng.normal(size=6), order=2))


class TestRidge:
    def test_hand_oracle(self):
        # (X^T X + I)^-1 X^T y with X = I_2: y / 2
        result = ridge_fit(design_from_arrays(np.eye(2), [2.0, 4.0], order=2), penalty=1.0)
        assert np.allclose(result.coeffs.stacked(), [[1.0], [2.0]], atol=1e-12)

    def test_zero_penalty_matches_ols(self):
        rng = np.random.default_rng(2)
        design = design_from_arrays(rng.normal(size=(30, 4)), rng.normal(size=(30, 2)), order=2)
        ols = ols_fit(design).stacked()
        ridge = ridge_fit(design, 0.0).coeffs.stacked()
        assert np.max(np.abs(ols - ridge)) < 1e-10

    def test_huge_penalty_shrinks_to_zero(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20, 3))
        y = rng.normal(size=(20, 3))
        result = ridge_fit(design_from_arrays(x, y, order=1), penalty=1e12)
        assert np.linalg.norm(result.coeffs.stacked()) < 1e-6 * np.linalg.norm(x.T @ y)

    def test_shrinkage_monotone_in_penalty(self):
        rng = np.random.default_rng(4)
        design = design_from_arrays(rng.normal(size=(40, 6)), rng.normal(size=(40, 2)), order=3)
        norms = [
            np.linalg.norm(ridge_fit(design, lam).coeffs.stacked())
            for lam in [0.0, 0.1, 1.0, 10.0, 100.0]
        ]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_objective_matches_recomputation(self):
        rng = np.random.default_rng(5)
        design = design_from_arrays(rng.normal(size=(25, 4)), rng.normal(size=(25, 2)), order=2)
        result = ridge_fit(design, 0.7)
        a = result.coeffs.stacked()
        recomputed = np.sum((design.x @ a - design.y) ** 2) + 0.7 * np.sum(a**2)
        assert result.objective_value == pytest.approx(recomputed, rel=1e-8)

    def test_per_column_decomposability(self):
        rng = np.random.default_rng(6)
        design = design_from_arrays(rng.normal(size=(30, 4)), rng.normal(size=(30, 2)), order=2)
        joint = ridge_fit(design, 0.5).coeffs.stacked()
        gram = design.x.T @ design.x + 0.5 * np.eye(4)
        for k in range(2):
            single = np.linalg.solve(gram, design.x.T @ design.y[:, k])
            assert np.max(np.abs(joint[:, k] - single)) < 1e-10


class TestLasso:
    def test_orthonormal_soft_threshold(self):
        # orthonormal design, OLS coefficient 3, lam=2 -> 3 - lam/2 = 2
        result = lasso_fit(design_from_arrays(np.eye(2), [3.0, 0.0], order=2), penalty=2.0)
        assert np.allclose(result.coeffs.stacked(), [[2.0], [0.0]], atol=1e-9)

    def test_lambda_max_gives_zero_solution(self):
        rng = np.random.default_rng(7)
        design = design_from_arrays(rng.normal(size=(20, 4)), rng.normal(size=(20, 2)), order=2)
        lam = lasso_lambda_max(design)
        result = lasso_fit(design, lam * 1.0001)
        assert np.all(result.coeffs.stacked() == 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_sign_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(6, 4))
        y = rng.normal(size=6)
        a = solve_lasso(x, y, penalty=1.0, tol=1e-9)
        _, best_obj = lasso_enumeration_oracle(x, y, 1.0)
        obj = np.sum((x @ a - y) ** 2) + np.sum(np.abs(a))
        assert obj == pytest.approx(best_obj, abs=1e-6)

    def test_kkt_certificate(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(30, 8))
        y = rng.normal(size=30)
        tol = 1e-7
        lam = 2.0
        a = solve_lasso(x, y, penalty=lam, tol=tol)
        grad2 = 2.0 * x.T @ (y - x @ a)
        for j in range(8):
            if a[j] != 0.0:
                assert abs(grad2[j] - lam * np.sign(a[j])) <= 10 * tol
            else:
                assert abs(grad2[j]) <= lam + 10 * tol


class TestGroupLasso:
    def test_singleton_groups_coincide_with_lasso(self):
        rng = np.random.default_rng(9)
        design = design_from_arrays(rng.normal(size=(30, 3)), rng.normal(size=(30, 3)), order=1)
        structure = GroupStructure.for_design(design)
        assert all(len(g) == 1 for g in structure.all_groups())
        glasso = group_lasso_fit(design, structure, penalty=1.5).coeffs.stacked()
        lasso = lasso_fit(design, penalty=1.5).coeffs.stacked()
        assert np.max(np.abs(glasso - lasso)) < 1e-6

    def test_lambda_max_zeroes_all_groups(self):
        rng = np.random.default_rng(10)
        design = design_from_arrays(rng.normal(size=(40, 6)), rng.normal(size=(40, 2)), order=3)
        structure = GroupStructure.for_design(design)
        lam = group_lambda_max(design, structure)
        result = group_lasso_fit(design, structure, penalty=lam * 1.0001)
        assert np.all(result.coeffs.stacked() == 0.0)

    def test_matches_proximal_gradient_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(20, 6))
        y = rng.normal(size=20)
        groups = [np.array([0, 1, 2]), np.array([3, 4, 5])]
        a = solve_group_lasso(x, y, groups, penalty=1.0, tol=1e-9)
        ref = group_prox_oracle(x, y, groups, 1.0)
        obj = group_objective(x, y, a, 1.0, groups)
        ref_obj = group_objective(x, y, ref, 1.0, groups)
        assert obj <= ref_obj + 1e-5 * (1.0 + abs(ref_obj))
        assert obj == pytest.approx(ref_obj, abs=1e-5)

    def test_kkt_certificates(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(25, 6))
        y = rng.normal(size=25)
        groups = [np.array([0, 1]), np.array([2, 3, 4]), np.array([5])]
        tol = 1e-7
        lam = 3.0
        a = solve_group_lasso(x, y, groups, penalty=lam, tol=tol)
        grad2 = 2.0 * x.T @ (y - x @ a)
        for g in groups:
            norm = np.linalg.norm(a[g])
            if norm > 0.0:
                assert np.linalg.norm(grad2[g] - lam * a[g] / norm) <= 10 * tol
            else:
                assert np.linalg.norm(grad2[g]) <= lam + 10 * tol

    def test_group_pattern_all_or_none(self):
        config = BenchmarkConfig(m=4, t=400, p_true=3, n_edges=4, noise_regime="white")
        inst = make_instance(config, 5)
        design = build_design(inst.sample, order=3)
        structure = GroupStructure.for_design(design)
        lam = 0.05 * group_lambda_max(design, structure)
        result = group_lasso_fit(design, structure, penalty=lam)
        a = result.coeffs.stacked()
        for k in range(4):
            for i in range(4):
                block = a[structure.source_group(i), k]
                assert np.all(block == 0.0) or np.linalg.norm(block) > 0.0


class TestRegularizationPath:
    def test_first_point_has_zero_support(self):
        rng = np.random.default_rng(13)
        design = design_from_arrays(rng.normal(size=(30, 4)), rng.normal(size=(30, 2)), order=2)
        for method in ("lasso", "group_lasso"):
            path = regularization_path(design, method, n_points=5)
            assert path[0].penalty >= path[-1].penalty
            assert np.all(path[0].coeffs.stacked() == 0.0)

    def test_dense_end_support_dominates(self):
        rng = np.random.default_rng(14)
        design = design_from_arrays(rng.normal(size=(50, 6)), rng.normal(size=(50, 2)), order=3)
        path = regularization_path(design, "lasso", n_points=8)
        first = np.count_nonzero(path[0].coeffs.stacked())
        last = np.count_nonzero(path[-1].coeffs.stacked())
        assert last >= first

    def test_paper_scale_span(self):
        config = BenchmarkConfig(noise_regime="white")
        inst = make_instance(config, 3)
        design = build_design(inst.sample, order=5)
        path = regularization_path(design, "group_lasso", n_points=20)
        m = 7

        def edge_count(res):
            lags = res.coeffs.lags
            active = np.any(lags != 0.0, axis=0)
            np.fill_diagonal(active, False)
            return active.sum()

        assert edge_count(path[0]) == 0
        assert edge_count(path[-1]) >= 0.9 * m * (m - 1)

    def test_too_few_points(self):
        rng = np.random.default_rng(15)
        design = design_from_arrays(rng.normal(size=(10, 2)), rng.normal(size=10), order=2)
        with pytest.raises(InvalidInputError):
            regularization_path(design, "lasso", n_points=1)


class TestCrossValidate:
    def test_singleton_grid(self):
        rng = np.random.default_rng(16)
        design = design_from_arrays(rng.normal(size=(40, 4)), rng.normal(size=(40, 2)), order=2)
        assert cross_validate(design, "ridge", folds=4, grid=[3.21]) == 3.21

    def test_pure_noise_selects_max_penalty(self):
        hits = 0
        coeffs = VarCoefficients(np.zeros((5, 7, 7)))
        for seed in range(10):
            sample = simulate_var(coeffs, steps=1000, noise_std=1.0, rng_seed=seed)
            design = build_design(sample, order=5)
            grid = cv_grid(design, "ridge", 8)
            if cross_validate(design, "ridge", folds=10, grid=grid) == grid[-1]:
                hits += 1
        assert hits >= 8

    def test_noiseless_selects_min_penalty(self):
        rng = np.random.default_rng(17)
        truth = VarCoefficients(0.25 * rng.normal(size=(1, 3, 3)))
        sample = simulate_var(truth, steps=300, noise_std=1.0, rng_seed=18)
        design = build_design(sample, order=1)
        noiseless = DesignPair(x=design.x, y=design.x @ truth.stacked(), n_series=3, order=1)
        grid = cv_grid(noiseless, "ridge", 8)
        assert cross_validate(noiseless, "ridge", folds=5, grid=grid) == grid[0]

    def test_sparse_methods_run(self):
        rng = np.random.default_rng(19)
        design = design_from_arrays(rng.normal(size=(36, 4)), rng.normal(size=(36, 2)), order=2)
        for method in ("lasso", "group_lasso"):
            grid = cv_grid(design, method, 4)
            assert cross_validate(design, method, folds=3, grid=grid) in grid

    def test_invalid_folds(self):
        rng = np.random.default_rng(20)
        design = design_from_arrays(rng.normal(size=(6, 2)), rng.normal(size=6), order=2)
        with pytest.raises(InvalidInputError):
            cross_validate(design, "ridge", folds=1, grid=[1.0])
        with pytest.raises(InvalidInputError):
            cross_validate(design, "ridge", folds=7, grid=[1.0])
