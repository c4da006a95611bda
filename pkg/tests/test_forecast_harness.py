"""
Rolling forecast harness and evaluation statistic tests.
"""
import math
import unittest

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin

from src.errors import DomainError, ForecastError, MetricError
from src.services.curve_core import QuotePanel
from src.services.data_io import FeaturePanel
from src.services.forecast_harness import (
    ForecastRun, build_dataset, cw_adjusted_loss, cw_test, difference, evaluate, evaluate_run,
    forecast_table, mae, r_oos, rmse, rolling_forecast, window_length,
)
from src.services.learners import Dataset, OLSRegressor


def linear_dataset(n=60, seed=0):
    rng = np.random.default_rng(seed)
    dates = pd.date_range('2001-01-31', periods=n, freq=pd.offsets.MonthEnd())
    X = pd.DataFrame(rng.normal(size=(n, 3)), index=dates, columns=['y1', 'y5', 'y10'])
    y = pd.Series(X.to_numpy() @ np.array([0.5, -1.0, 0.2]) + 0.1 * rng.normal(size=n), index=dates)
    return Dataset(X, y, ['yields'] * 3)


def ones_dataset(values):
    dates = pd.date_range('2001-01-31', periods=len(values), freq=pd.offsets.MonthEnd())
    return Dataset(pd.DataFrame({'one': np.ones(len(values))}, index=dates),
                   pd.Series(values, index=dates, dtype=float), ['yields'])


class FailingRegressor(BaseEstimator, RegressorMixin):
    def fit(self, X, y):
        raise RuntimeError("cannot fit")

    def predict(self, X):
        return np.zeros(len(X))


class TestDataset(unittest.TestCase):
    """Design construction."""

    def setUp(self):
        dates = pd.date_range('2010-01-31', periods=6, freq=pd.offsets.MonthEnd())
        yields = pd.DataFrame({1.0: [0.01, 0.02, 0.04, 0.07, 0.11, 0.16],
                               10.0: [0.03, 0.03, 0.02, 0.02, 0.05, 0.05]}, index=dates)
        self.panel = QuotePanel(yields)
        self.target = pd.Series([0.040, 0.041, 0.043, 0.040, 0.044, 0.049], index=dates)

    def test_difference(self):
        np.testing.assert_allclose(difference([1.0, 3.0, 2.0]), [2.0, -1.0])
        series = difference(self.target)
        self.assertEqual(len(series), 5)
        self.assertEqual(series.index[0], self.target.index[1])
        with self.assertRaises(DomainError):
            difference([1.0])

    def test_features_lag_the_target(self):
        ds = build_dataset(self.target, self.panel)
        self.assertEqual(len(ds), 4)
        self.assertEqual(ds.feature_names, ['y1', 'y10'])
        first = ds.X.index[0]
        self.assertEqual(first, self.target.index[2])
        self.assertAlmostEqual(ds.X.loc[first, 'y1'], 0.01)
        self.assertAlmostEqual(ds.y.loc[first], 0.002)

    def test_macro_features(self):
        macro = FeaturePanel(pd.DataFrame({'gdp_1': np.arange(6.0)}, index=self.panel.dates), {'gdp_1': 'Output'})
        ds = build_dataset(self.target, self.panel, macro, 'yields_plus_macro')
        self.assertEqual(ds.groups, ['yields', 'yields', 'Output'])
        self.assertEqual(ds.X['gdp_1'].iloc[0], 1.0)
        with self.assertRaises(DomainError):
            build_dataset(self.target, self.panel, None, 'yields_plus_macro')
        with self.assertRaises(DomainError):
            build_dataset(self.target, self.panel, feature_set='everything')


class TestRollingForecast(unittest.TestCase):
    """Rolling window mechanics."""

    def test_window_length(self):
        self.assertEqual(window_length(100, 0.75), 75)
        self.assertEqual(window_length(100, window=99), 99)
        with self.assertRaises(DomainError):
            window_length(100, window=100)
        with self.assertRaises(DomainError):
            window_length(24, 0.75)
        with self.assertRaises(DomainError):
            window_length(100, 1.0)

    def test_single_out_of_sample_step(self):
        ds = linear_dataset(40)
        run = rolling_forecast(ds, OLSRegressor(), window=39)
        self.assertEqual(len(run), 1)
        self.assertEqual(run.dates[0], ds.y.index[-1])
        self.assertEqual(run.window, 39)

    def test_window_mean_model(self):
        values = np.arange(30.0) ** 1.5
        run = rolling_forecast(ones_dataset(values), OLSRegressor(fit_intercept=False), window=20, standardize=False)
        expected = [values[t - 20:t].mean() for t in range(20, 30)]
        np.testing.assert_allclose(run.predictions, expected, rtol=1e-12)
        np.testing.assert_array_equal(run.actuals, values[20:])
        np.testing.assert_array_equal(run.benchmark, np.zeros(10))

    def test_no_lookahead(self):
        ds = linear_dataset(50)
        base = rolling_forecast(ds, OLSRegressor(), window=30)
        shifted_y = ds.y.copy()
        shifted_y.iloc[-1] += 100.0
        altered = rolling_forecast(Dataset(ds.X, shifted_y, ds.groups), OLSRegressor(), window=30)
        np.testing.assert_array_equal(base.predictions, altered.predictions)
        self.assertEqual(altered.actuals[-1] - base.actuals[-1], 100.0)

    def test_standardised_ols_matches_raw(self):
        ds = linear_dataset(50, seed=1)
        scaled = rolling_forecast(ds, OLSRegressor(), window=30)
        raw = rolling_forecast(ds, OLSRegressor(), window=30, standardize=False)
        np.testing.assert_allclose(scaled.predictions, raw.predictions, atol=1e-10)

    def test_failures(self):
        ds = linear_dataset(40)
        with self.assertRaises(ForecastError) as context:
            rolling_forecast(ds, FailingRegressor(), window=30)
        self.assertEqual(context.exception.window_index, 0)
        with self.assertRaises(DomainError):
            rolling_forecast(ds, OLSRegressor(), horizon=2)

    def test_forecast_table(self):
        table = forecast_table({'UFR': linear_dataset(60)}, ['ols', 'ridge'], seed=3)
        self.assertEqual(list(table['model']), ['ols', 'ridge'])
        self.assertEqual(list(table['n']), [15, 15])
        self.assertTrue(np.all(table['r_oos'] > 0.5))


class TestMetrics(unittest.TestCase):
    """Accuracy metrics and the Clark-West statistic."""

    def test_rmse_mae(self):
        self.assertAlmostEqual(rmse([1.0, 2.0], [1.0, 4.0]), math.sqrt(2.0))
        self.assertAlmostEqual(mae([1.0, 2.0], [1.0, 4.0]), 1.0)
        with self.assertRaises(MetricError):
            rmse([1.0], [1.0, 2.0])
        with self.assertRaises(MetricError):
            mae([], [])

    def test_r_oos_identities(self):
        actual = np.array([0.5, -1.0, 2.0, 0.0])
        benchmark = np.zeros(4)
        self.assertEqual(r_oos(benchmark, benchmark, actual), 0.0)
        self.assertEqual(r_oos(actual, benchmark, actual), 1.0)
        self.assertAlmostEqual(r_oos(0.5 * actual, benchmark, actual), 0.75)
        with self.assertRaises(MetricError):
            r_oos(actual, actual, actual)

    def test_cw_identical_forecasts(self):
        rng = np.random.default_rng(0)
        actual, pred = rng.normal(size=20), rng.normal(size=20)
        np.testing.assert_array_equal(cw_adjusted_loss(pred, pred, actual), np.zeros(20))
        result = cw_test(pred, pred, actual)
        self.assertEqual(result.stat, 0.0)
        self.assertEqual(result.band, 'none')

    def test_cw_perfect_forecast(self):
        actual = np.array([1.0, -2.0, 0.5, 3.0, -0.25, 1.5, -1.0, 0.75, 2.0, -0.5, 0.0, 1.25])
        np.testing.assert_array_equal(cw_adjusted_loss(actual, np.zeros(12), actual), np.zeros(12))
        np.testing.assert_array_equal(cw_adjusted_loss(actual, 0.3 * actual, actual), np.zeros(12))
        result = cw_test(actual, np.zeros(12), actual)
        self.assertEqual(result.stat, 0.0)
        self.assertEqual(result.band, 'none')

    def test_cw_direct_formula(self):
        rng = np.random.default_rng(1)
        actual = rng.normal(size=12)
        benchmark = np.zeros(12)
        candidate = 0.8 * actual + 0.3 * rng.normal(size=12)
        modified_mse = (actual - candidate) ** 2 - (actual - benchmark) ** 2 + (benchmark - candidate) ** 2
        d = cw_adjusted_loss(candidate, benchmark, actual)
        np.testing.assert_allclose(d, -modified_mse, atol=1e-12)
        np.testing.assert_allclose(d, 2.0 * (actual - candidate) * (candidate - benchmark), atol=1e-12)
        expected = d.mean() / (d.std(ddof=1) / math.sqrt(12))
        self.assertLess(abs(cw_test(candidate, benchmark, actual).stat - expected), 1e-10)

    def test_cw_favours_shrunk_candidate(self):
        rng = np.random.default_rng(4)
        actual = rng.normal(size=200)
        candidate = 0.5 * actual
        self.assertTrue(np.all(cw_adjusted_loss(candidate, np.zeros(200), actual) >= 0.0))
        self.assertEqual(cw_test(candidate, np.zeros(200), actual).band, '1%')

    def test_cw_band_needs_positive_r_oos(self):
        rng = np.random.default_rng(2)
        actual = rng.normal(size=30)
        candidate = 3.0 * actual
        self.assertLess(r_oos(candidate, np.zeros(30), actual), 0.0)
        self.assertEqual(cw_test(candidate, np.zeros(30), actual).band, 'none')

    def test_cw_minimum_observations(self):
        with self.assertRaises(MetricError):
            cw_test(np.ones(9), np.zeros(9), np.ones(9))

    def test_evaluate_report(self):
        rng = np.random.default_rng(3)
        actual = rng.normal(size=40)
        run = ForecastRun(pd.date_range('2005-01-31', periods=40, freq=pd.offsets.MonthEnd()), 0.9 * actual, actual, 100)
        report = evaluate_run(run)
        self.assertEqual(report.n, 40)
        self.assertAlmostEqual(report.r_oos, 0.99)
        self.assertEqual(report.cw_band, '1%')
        self.assertEqual(report.label, '99.00***')
        self.assertEqual(report, evaluate(0.9 * actual, np.zeros(40), actual))
        self.assertEqual(set(report.to_dict()), {'rmse', 'mae', 'r_oos', 'cw_stat', 'cw_band', 'n'})
        self.assertEqual(len(run.to_frame()), 40)


if __name__ == '__main__':
    unittest.main()
