"""
Neural network tests: gradients, training behaviour and architecture checks.
"""
import unittest

import numpy as np
import pandas as pd

from src.errors import DomainError, TrainingError
from src.services.learners import Dataset
from src.services.neural_nets import ARCHITECTURES, MLPRegressorNet, fit_mlp

GROUPS = ['yields', 'yields', 'yields', 'Output', 'Output', 'Tax', 'Tax']


def toy_data(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, len(GROUPS)))
    y = X[:, 0] - 0.5 * X[:, 3] + 0.3 * np.tanh(X[:, 5]) + 0.1 * rng.normal(size=n)
    return X, y


def small_net(architecture, **kwargs):
    settings = dict(hidden=(4, 3), group_nodes=2, combiner_nodes=3, groups=GROUPS, l2=0.01, seed=5)
    settings.update(kwargs)
    return MLPRegressorNet(architecture, **settings)


class TestGradients(unittest.TestCase):
    """Analytic gradients against central differences."""

    def test_finite_difference_all_architectures(self):
        X, y = toy_data(5)
        rng = np.random.default_rng(1)
        step = 1e-5
        for architecture in ARCHITECTURES:
            with self.subTest(architecture=architecture):
                model = small_net(architecture, epochs=0).fit(X, y)
                params = model.parameters()
                for p in params:
                    p[...] = rng.normal(0.0, 0.5, p.shape)
                z = (y - y.mean()) / y.std()
                _, grads = model.loss_and_grads(X, z)
                worst = 0.0
                for p, g in zip(params, grads):
                    self.assertEqual(p.shape, g.shape)
                    for index in np.ndindex(p.shape):
                        original = p[index]
                        p[index] = original + step
                        upper, _ = model.loss_and_grads(X, z)
                        p[index] = original - step
                        lower, _ = model.loss_and_grads(X, z)
                        p[index] = original
                        numeric = (upper - lower) / (2 * step)
                        analytic = g[index]
                        error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
                        worst = max(worst, error)
                self.assertLess(worst, 1e-4)


class TestTraining(unittest.TestCase):
    """Training loop behaviour."""

    def test_loss_does_not_increase(self):
        X, y = toy_data(40, seed=2)
        for architecture in ARCHITECTURES:
            with self.subTest(architecture=architecture):
                model = small_net(architecture, epochs=60, lr=0.01).fit(X, y)
                self.assertEqual(len(model.loss_curve_), 61)
                self.assertLessEqual(model.loss_curve_[-1], model.loss_curve_[0])

    def test_untrained_network_predicts_target_mean(self):
        X, y = toy_data(30, seed=3)
        model = small_net('Double', epochs=0).fit(X, y)
        np.testing.assert_allclose(model.predict(X), y.mean(), atol=1e-12)

    def test_huge_penalty_predicts_mean(self):
        X, y = toy_data(30, seed=4)
        model = small_net('YieldMacro', l2=100.0, lr=1e-3, epochs=500).fit(X, y)
        np.testing.assert_allclose(model.predict(X), y.mean(), atol=1e-3 * y.std())

    def test_seed_determinism(self):
        X, y = toy_data(30, seed=5)
        first = small_net('GroupEnsemble', epochs=30, lr=0.01, batch_size=8).fit(X, y).predict(X)
        second = small_net('GroupEnsemble', epochs=30, lr=0.01, batch_size=8).fit(X, y).predict(X)
        np.testing.assert_array_equal(first, second)

    def test_divergence_raises(self):
        X, y = toy_data(20, seed=6)
        with self.assertRaises(TrainingError):
            with np.errstate(all='ignore'):
                small_net('YieldMacro', lr=1e6, l2=1e-2, epochs=200).fit(X, y)

    def test_learns_linear_signal(self):
        X, y = toy_data(200, seed=7)
        model = small_net('YieldMacro', hidden=(8,), epochs=400, lr=0.05, l2=1e-4).fit(X, y)
        residual = model.predict(X) - y
        self.assertLess(np.mean(residual ** 2), 0.5 * np.var(y))


class TestArchitectures(unittest.TestCase):
    """Architecture validation."""

    def test_grouped_architectures_need_labels(self):
        X, y = toy_data(10)
        with self.assertRaises(DomainError):
            MLPRegressorNet('GroupEnsemble', groups=None, epochs=0).fit(X, y)
        with self.assertRaises(DomainError):
            MLPRegressorNet('Hybrid', groups=['yields'] * 7, epochs=0).fit(X, y)
        with self.assertRaises(DomainError):
            MLPRegressorNet('YieldOnly', groups=['Output'] * 7, epochs=0).fit(X, y)
        with self.assertRaises(DomainError):
            MLPRegressorNet('Wide', groups=GROUPS, epochs=0).fit(X, y)

    def test_yield_only_ignores_macro(self):
        X, y = toy_data(30, seed=8)
        model = small_net('YieldOnly', epochs=20, lr=0.01).fit(X, y)
        shifted = X.copy()
        shifted[:, 3:] += 5.0
        np.testing.assert_array_equal(model.predict(X), model.predict(shifted))

    def test_fit_mlp_on_dataset(self):
        X, y = toy_data(20, seed=9)
        ds = Dataset(pd.DataFrame(X, columns=[f"c{j}" for j in range(7)]), pd.Series(y), GROUPS)
        model = fit_mlp(ds, 'Hybrid', hidden=(4,), epochs=5, lr=0.01)
        self.assertEqual(model.predict(X).shape, (20,))


if __name__ == '__main__':
    unittest.main()
