"""
Synthetic data generator tests.
"""
import unittest

import numpy as np

from src.errors import ConfigError
from src.services.data_io import MACRO_GROUPS
from src.services.synthetic import SynthConfig, synth_generate
from src.services.ufr_extract import extract_series


class TestSynthGenerate(unittest.TestCase):
    """Determinism, shapes and embedded ground truth."""

    def test_same_seed_same_panels(self):
        config = SynthConfig(n_months=60)
        first, second = synth_generate(config, 3), synth_generate(config, 3)
        np.testing.assert_array_equal(first.panel.yields.to_numpy(), second.panel.yields.to_numpy())
        np.testing.assert_array_equal(first.macro.data.to_numpy(), second.macro.data.to_numpy())
        np.testing.assert_array_equal(first.truth.f_inf, second.truth.f_inf)
        other = synth_generate(config, 4)
        self.assertFalse(np.array_equal(first.truth.f_inf, other.truth.f_inf))

    def test_shapes_and_groups(self):
        data = synth_generate(SynthConfig(n_months=60, vars_per_group=3), 1)
        self.assertEqual(data.panel.yields.shape, (60, 11))
        self.assertEqual(data.macro.data.shape, (60, 3 * len(MACRO_GROUPS)))
        self.assertEqual(data.macro.group_names(), list(MACRO_GROUPS))
        self.assertTrue(data.panel.dates.equals(data.truth.dates))

    def test_zero_volatility_constant_truth(self):
        data = synth_generate(SynthConfig(n_months=60, ufr_vol=0.0, ufr_drift=0.0), 2)
        np.testing.assert_array_equal(data.truth.f_inf, np.full(60, 0.04))

    def test_sdf_recovers_truth_without_curve_noise(self):
        data = synth_generate(SynthConfig(n_months=60, xi_noise=0.0), 6)
        series = extract_series(data.panel, 'SDF')
        self.assertEqual(series.failures, {})
        np.testing.assert_allclose(series.f_inf, data.truth.f_inf, atol=1e-6)

    def test_curve_noise_scales_deviations(self):
        flat = synth_generate(SynthConfig(n_months=60, xi_noise=0.0), 8)
        np.testing.assert_array_equal(flat.panel.yields.to_numpy(), np.repeat(flat.truth.f_inf[:, None], 11, axis=1))
        half = synth_generate(SynthConfig(n_months=60, xi_noise=0.5), 8).panel.yields.to_numpy()
        full = synth_generate(SynthConfig(n_months=60, xi_noise=1.0), 8).panel.yields.to_numpy()
        truth = flat.truth.f_inf[:, None]
        np.testing.assert_allclose(full - truth, 2.0 * (half - truth), atol=1e-15)
        self.assertGreater(np.abs(full - truth).max(), 0.0)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            SynthConfig(n_months=59)
        with self.assertRaises(ConfigError):
            SynthConfig(ufr_vol=-0.1)
        with self.assertRaises(ConfigError):
            SynthConfig(vars_per_group=0)


if __name__ == '__main__':
    unittest.main()
