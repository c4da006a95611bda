"""
Linear, factor and tree learner tests.
"""
import unittest

import numpy as np
import pandas as pd
from sklearn.linear_model import ElasticNet, Ridge
from sklearn.pipeline import Pipeline

from src.errors import ConvergenceError, DomainError
from src.services.data_io import FeaturePanel
from src.services.learners import (
    Dataset, GradientBoosting, GroupFirstComponent, ModelSpec, OLSRegressor, PCRRegressor, PenalizedRegressor,
    PLSRegressor, RandomForest, RegressionTree, build_model, fit_gbrt, fit_ols, fit_penalized, fit_pcr, fit_pls,
    fit_tree, fit_xgb, pca, pca_first_per_group, resolve_spec, soft_threshold,
)
from src.services.neural_nets import MLPRegressorNet


def make_dataset(n=60, p=4, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = X @ np.arange(1.0, p + 1.0) + 0.5 + noise * rng.normal(size=n)
    frame = pd.DataFrame(X, columns=[f"x{j}" for j in range(p)])
    return Dataset(frame, pd.Series(y), ['yields'] * p)


def brute_force_tree(X, y, depth):
    """Greedy tree by exhaustive split search, as nested (feature, threshold, left, right) tuples."""
    if depth == 0 or len(y) < 2:
        return float(y.mean())
    best = None
    base = ((y - y.mean()) ** 2).sum()
    for j in range(X.shape[1]):
        values = np.unique(X[:, j])
        for a, b in zip(values[:-1], values[1:]):
            threshold = 0.5 * (a + b)
            left = X[:, j] <= threshold
            sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
            if sse < base - 1e-12 and (best is None or sse < best[0]):
                best = (sse, j, threshold)
    if best is None:
        return float(y.mean())
    _, j, threshold = best
    left = X[:, j] <= threshold
    return (j, threshold, brute_force_tree(X[left], y[left], depth - 1), brute_force_tree(X[~left], y[~left], depth - 1))


def brute_force_predict(tree, x):
    while isinstance(tree, tuple):
        j, threshold, left, right = tree
        tree = left if x[j] <= threshold else right
    return tree


class TestLinearModels(unittest.TestCase):
    """OLS and penalized regression tests."""

    def test_ols_exact_fit(self):
        ds = make_dataset(noise=0.0)
        model = fit_ols(ds)
        residuals = ds.y.to_numpy() - model.predict(ds.X)
        self.assertLess(np.max(np.abs(residuals)), 1e-10)
        np.testing.assert_allclose(model.coef_, [1.0, 2.0, 3.0, 4.0], atol=1e-10)

    def test_ols_constant_column(self):
        y = np.array([1.0, 4.0, 7.0])
        model = OLSRegressor(fit_intercept=False).fit(np.ones((3, 1)), y)
        self.assertAlmostEqual(model.coef_[0], 4.0, places=12)

    def test_ols_normal_equations(self):
        X = np.array([[1.0, 2.0], [3.0, 1.0], [0.0, 1.0]])
        y = np.array([1.0, 2.0, 0.5])
        model = OLSRegressor(fit_intercept=False).fit(X, y)
        np.testing.assert_allclose(model.coef_, np.linalg.solve(X.T @ X, X.T @ y), atol=1e-12)

    def test_ols_rank_deficient(self):
        X = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
        with self.assertRaises(DomainError):
            OLSRegressor().fit(X, np.arange(5.0))

    def test_ridge_zero_penalty_is_ols(self):
        ds = make_dataset()
        ridge = fit_penalized(ds, 'ridge', 0.0)
        ols = fit_ols(ds)
        np.testing.assert_allclose(ridge.coef_, ols.coef_, atol=1e-8)
        self.assertAlmostEqual(ridge.intercept_, ols.intercept_, delta=1e-8)

    def test_ridge_matches_sklearn(self):
        ds = make_dataset(seed=3)
        ours = fit_penalized(ds, 'ridge', 7.5)
        reference = Ridge(alpha=7.5).fit(ds.X.to_numpy(), ds.y.to_numpy())
        np.testing.assert_allclose(ours.coef_, reference.coef_, atol=1e-8)
        self.assertAlmostEqual(ours.intercept_, reference.intercept_, delta=1e-8)

    def test_ridge_huge_penalty(self):
        ds = make_dataset()
        model = fit_penalized(ds, 'ridge', 1e12)
        self.assertLess(np.max(np.abs(model.coef_)), 1e-6)
        self.assertAlmostEqual(model.intercept_, ds.y.mean(), delta=1e-6)

    def test_ridge_shrinks_monotonically(self):
        ds = make_dataset(seed=4)
        norms = [np.linalg.norm(fit_penalized(ds, 'ridge', lam).coef_) for lam in (0.0, 0.1, 1.0, 10.0, 100.0)]
        self.assertTrue(all(a > b for a, b in zip(norms, norms[1:])))

    def test_lasso_univariate_soft_threshold(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=50)
        x = (x - x.mean()) / x.std()
        y = 0.7 * x + rng.normal(size=50)
        lam = 5.0
        model = PenalizedRegressor('lasso', lam).fit(x[:, None], y)
        rho = x @ (y - y.mean())
        self.assertAlmostEqual(model.coef_[0], soft_threshold(rho, lam) / (x @ x), delta=1e-8)

    def test_lasso_kills_weak_coefficients(self):
        ds = make_dataset(seed=2)
        model = fit_penalized(ds, 'lasso', 1e6)
        np.testing.assert_array_equal(model.coef_, np.zeros(4))

    def test_elastic_net_matches_sklearn(self):
        ds = make_dataset(seed=5, noise=1.0)
        n = len(ds)
        ours = fit_penalized(ds, 'enet', 6.0, 0.4)
        reference = ElasticNet(alpha=6.0 / n, l1_ratio=0.4, tol=1e-12, max_iter=100000)
        reference.fit(ds.X.to_numpy(), ds.y.to_numpy())
        np.testing.assert_allclose(ours.coef_, reference.coef_, atol=1e-6)

    def test_convergence_cap(self):
        ds = make_dataset(seed=6)
        with self.assertRaises(ConvergenceError) as ctx:
            PenalizedRegressor('lasso', 0.01, max_sweeps=1).fit(ds.X, ds.y)
        self.assertEqual(ctx.exception.iterations, 1)

    def test_invalid_penalty(self):
        ds = make_dataset()
        with self.assertRaises(DomainError):
            fit_penalized(ds, 'ridge', -1.0)
        with self.assertRaises(DomainError):
            fit_penalized(ds, 'enet', 1.0, 1.5)
        with self.assertRaises(DomainError):
            fit_penalized(ds, 'bridge', 1.0)


class TestFactorModels(unittest.TestCase):
    """PCA, PCR and PLS tests."""

    def test_pca_on_a_line(self):
        x = np.linspace(-1.0, 1.0, 9)
        result = pca(np.column_stack([x, 2 * x]), 1, standardize=False)
        np.testing.assert_allclose(result.components[0], np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-12)
        self.assertLess(result.singular_values[1], 1e-12)
        self.assertAlmostEqual(result.explained_ratio[0], 1.0, places=12)

    def test_pca_component_range(self):
        X = np.random.default_rng(0).normal(size=(10, 3))
        with self.assertRaises(DomainError):
            pca(X, 0)
        with self.assertRaises(DomainError):
            pca(X, 4)

    def test_pcr_full_rank_equals_ols(self):
        ds = make_dataset(seed=7)
        np.testing.assert_allclose(fit_pcr(ds, 4).predict(ds.X), fit_ols(ds).predict(ds.X), atol=1e-8)

    def test_pls_full_rank_equals_ols(self):
        ds = make_dataset(seed=9)
        np.testing.assert_allclose(fit_pls(ds, 4).predict(ds.X), fit_ols(ds).predict(ds.X), atol=1e-6)

    def test_pls_single_component_direction(self):
        ds = make_dataset(seed=10)
        model = PLSRegressor(1).fit(ds.X, ds.y)
        Xc = ds.X.to_numpy() - ds.X.to_numpy().mean(axis=0)
        w = Xc.T @ (ds.y.to_numpy() - ds.y.mean())
        cosine = model.coef_ @ w / (np.linalg.norm(model.coef_) * np.linalg.norm(w))
        self.assertAlmostEqual(cosine, 1.0, places=10)

    def test_pls_component_range(self):
        ds = make_dataset()
        with self.assertRaises(DomainError):
            fit_pls(ds, 5)

    def test_pcr_transform(self):
        ds = make_dataset()
        model = PCRRegressor(2).fit(ds.X, ds.y)
        np.testing.assert_allclose(model.transform(ds.X), model.pca_.scores, atol=1e-12)


class TestGroupComponents(unittest.TestCase):
    """First principal component per macro group."""

    def setUp(self):
        rng = np.random.default_rng(11)
        dates = pd.date_range('2010-01-31', periods=40, freq='MS')
        base = rng.normal(size=40)
        self.data = pd.DataFrame({
            'out_1': rng.normal(size=40),
            'tax_1': base,
            'tax_2': 3.0 * base + 1.0,
            'trade_1': rng.normal(size=40),
            'trade_2': rng.normal(size=40),
            'trade_3': rng.normal(size=40),
        }, index=dates)
        groups = {'out_1': 'Output', 'tax_1': 'Tax', 'tax_2': 'Tax',
                  'trade_1': 'Trade', 'trade_2': 'Trade', 'trade_3': 'Trade'}
        self.panel = FeaturePanel(self.data, groups)

    def test_single_variable_group(self):
        scores = pca_first_per_group(self.panel)
        x = self.data['out_1']
        np.testing.assert_allclose(scores['Output'], (x - x.mean()) / x.std(ddof=0), atol=1e-10)

    def test_perfectly_correlated_group(self):
        scores = pca_first_per_group(self.panel)
        x = self.data['tax_1']
        self.assertAlmostEqual(abs(np.corrcoef(scores['Tax'], x)[0, 1]), 1.0, places=10)

    def test_three_variable_group_matches_eigen_oracle(self):
        scores = pca_first_per_group(self.panel)
        block = self.data[['trade_1', 'trade_2', 'trade_3']].to_numpy()
        Z = (block - block.mean(axis=0)) / block.std(axis=0)
        _, vectors = np.linalg.eigh(np.cov(Z, rowvar=False))
        oracle = Z @ vectors[:, -1]
        oracle /= oracle.std()
        self.assertAlmostEqual(abs(np.corrcoef(scores['Trade'], oracle)[0, 1]), 1.0, places=10)
        np.testing.assert_allclose(np.abs(scores['Trade']), np.abs(oracle), atol=1e-8)
        self.assertEqual(list(scores.columns), ['Output', 'Tax', 'Trade'])

    def test_group_transformer(self):
        X = np.column_stack([np.ones(40), np.arange(40.0), self.data.to_numpy()])
        groups = ['yields', 'yields', 'Output', 'Tax', 'Tax', 'Trade', 'Trade', 'Trade']
        transformed = GroupFirstComponent(groups).fit_transform(X)
        self.assertEqual(transformed.shape, (40, 5))
        np.testing.assert_array_equal(transformed[:, :2], X[:, :2])


class TestTrees(unittest.TestCase):
    """Tree, forest and boosting tests."""

    def test_constant_target_single_leaf(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        model = RegressionTree(max_depth=4).fit(X, np.full(20, 2.5))
        self.assertEqual(model.tree_.depth(), 0)
        np.testing.assert_allclose(model.predict(X), 2.5)

    def test_step_function(self):
        x = np.arange(10.0)[:, None]
        y = np.where(x[:, 0] < 4.5, -1.0, 3.0)
        model = RegressionTree(max_depth=1).fit(x, y)
        self.assertEqual(model.tree_.feature, 0)
        self.assertAlmostEqual(model.tree_.threshold, 4.5)
        np.testing.assert_allclose(model.predict(x), y, atol=1e-12)

    def test_depth_two_matches_exhaustive_search(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            X = rng.normal(size=(8, 2))
            y = rng.normal(size=8)
            model = RegressionTree(max_depth=2, min_leaf=1).fit(X, y)
            oracle = brute_force_tree(X, y, 2)
            probe = np.vstack([X, rng.normal(size=(20, 2))])
            expected = np.array([brute_force_predict(oracle, row) for row in probe])
            np.testing.assert_allclose(model.predict(probe), expected, atol=1e-12)

    def test_tree_errors(self):
        with self.assertRaises(DomainError):
            RegressionTree(min_leaf=0).fit(np.ones((3, 1)), np.ones(3))
        with self.assertRaises(DomainError):
            RegressionTree().fit(np.empty((0, 2)), np.empty(0))

    def test_forest_is_mean_of_members(self):
        ds = make_dataset(seed=12, noise=1.0)
        model = RandomForest(n_estimators=15, max_depth=3, min_leaf=2, feature_frac=0.5, seed=4).fit(ds.X, ds.y)
        members = model.predict_members(ds.X)
        np.testing.assert_array_equal(model.predict(ds.X), np.mean(members, axis=0))
        again = RandomForest(n_estimators=15, max_depth=3, min_leaf=2, feature_frac=0.5, seed=4).fit(ds.X, ds.y)
        np.testing.assert_array_equal(again.predict(ds.X), model.predict(ds.X))

    def test_gbrt_zero_stages(self):
        ds = make_dataset()
        model = fit_gbrt(ds, n_estimators=0)
        np.testing.assert_allclose(model.predict(ds.X), ds.y.mean())

    def test_gbrt_interpolates(self):
        ds = make_dataset(n=12, seed=13, noise=1.0)
        model = GradientBoosting(n_estimators=12, learning_rate=1.0, max_depth=None).fit(ds.X, ds.y)
        self.assertLess(np.max(np.abs(model.predict(ds.X) - ds.y.to_numpy())), 1e-8)

    def test_one_boosting_step(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([1.0, 2.0, 4.0, 9.0])
        model = GradientBoosting(n_estimators=1, learning_rate=0.3, max_depth=1).fit(X, y)
        stage = RegressionTree(max_depth=1).fit(X, y - y.mean())
        np.testing.assert_allclose(model.predict(X), y.mean() + 0.3 * stage.predict(X), atol=1e-12)

    def test_xgb_without_penalties_is_gbrt(self):
        ds = make_dataset(seed=14, noise=1.0)
        xgb = fit_xgb(ds, n_estimators=20, learning_rate=0.2, max_depth=2, reg_lambda=0.0, gamma=0.0)
        gbrt = fit_gbrt(ds, n_estimators=20, learning_rate=0.2, max_depth=2)
        for a, b in zip(xgb.staged_predict(ds.X), gbrt.staged_predict(ds.X)):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_xgb_huge_gamma_never_splits(self):
        ds = make_dataset(seed=15)
        model = fit_xgb(ds, n_estimators=5, learning_rate=0.5, reg_lambda=1.0, gamma=1e9)
        self.assertTrue(all(tree.is_leaf for tree in model.trees_))
        np.testing.assert_allclose(model.predict(ds.X), ds.y.mean(), atol=1e-12)

    def test_xgb_leaf_weights(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0.0, 0.0, 2.0, 2.0])
        model = GradientBoosting(n_estimators=1, learning_rate=1.0, max_depth=1, reg_lambda=1.0).fit(X, y)
        tree = model.trees_[0]
        self.assertAlmostEqual(tree.left.value, -2.0 / 3.0, places=12)
        self.assertAlmostEqual(tree.right.value, 2.0 / 3.0, places=12)
        np.testing.assert_allclose(model.predict(X), [1 / 3, 1 / 3, 5 / 3, 5 / 3], atol=1e-12)


class TestModelSpecs(unittest.TestCase):
    """Preset resolution and model construction."""

    def test_presets_build(self):
        groups = ['yields'] * 3 + ['Output', 'Tax']
        for name in ('ols', 'ridge', 'lasso', 'enet', 'pcr3', 'pls3', 'tree', 'forest', 'gbrt', 'xgb', 'hybrid_net'):
            model = build_model(resolve_spec(name, seed=1), groups)
            self.assertTrue(hasattr(model, 'fit'))
        self.assertIsInstance(build_model(resolve_spec('ols'), groups), Pipeline)
        self.assertIsInstance(build_model(resolve_spec('ols'), ['yields'] * 3), OLSRegressor)
        net = build_model(resolve_spec('yield_macro_net', seed=3), groups, {'epochs': 7})
        self.assertIsInstance(net, MLPRegressorNet)
        self.assertEqual(net.epochs, 7)
        self.assertEqual(net.seed, 3)

    def test_unknown_names(self):
        with self.assertRaises(DomainError):
            resolve_spec('svm')
        with self.assertRaises(DomainError):
            ModelSpec('SVM')

    def test_fit_tree_on_dataset(self):
        ds = make_dataset()
        self.assertLessEqual(fit_tree(ds, max_depth=2).tree_.depth(), 2)

    def test_dataset_validation(self):
        frame = pd.DataFrame({'a': [1.0, 2.0]})
        with self.assertRaises(DomainError):
            Dataset(frame, pd.Series([1.0]), ['yields'])
        with self.assertRaises(DomainError):
            Dataset(frame, pd.Series([1.0, np.nan]), ['yields'])


if __name__ == '__main__':
    unittest.main()
