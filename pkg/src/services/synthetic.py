"""
Synthetic data generator.

Builds a yield panel as a random-walk f_inf path plus a three-factor
deviation at every maturity, and grouped macro series that carry a signal
about the next UFR move.
"""
import logging
import re
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
import pandas as pd

from ..errors import ConfigError
from .curve_core import QuotePanel, TermGrid
from .data_io import MACRO_GROUPS, FeaturePanel
from .ufr_extract import UfrSeries

logger = logging.getLogger(__name__)

DEFAULT_MATURITIES = (1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0)


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic panel settings; rates are continuous decimals."""

    n_months: int = 240
    ufr_start: float = 0.04
    ufr_drift: float = 0.0
    ufr_vol: float = 0.001
    xi_noise: float = 1.0
    signal_strength: float = 1.0
    vars_per_group: int = 2
    macro_persistence: float = 0.5
    factor_persistence: float = 0.95
    factor_decay: float = 3.0
    maturities: Tuple[float, ...] = DEFAULT_MATURITIES
    start: str = '2000-01-31'

    def __post_init__(self):
        if self.n_months < 60:
            raise ConfigError("n_months must be at least 60")
        if self.ufr_vol < 0 or self.xi_noise < 0:
            raise ConfigError("volatility and xi noise must be non-negative")
        if self.vars_per_group < 1:
            raise ConfigError("vars_per_group must be at least 1")
        if not 0 <= self.macro_persistence < 1 or not 0 <= self.factor_persistence < 1:
            raise ConfigError("AR(1) persistence must lie in [0, 1)")


class SynthData(NamedTuple):
    panel: QuotePanel
    macro: FeaturePanel
    truth: UfrSeries


def _slug(group: str) -> str:
    return re.sub(r'[^a-z0-9]+', '_', group.lower()).strip('_')


def _ar1(rng: np.random.Generator, n: int, size: int, phi: float, scale: float) -> np.ndarray:
    shocks = rng.normal(0.0, scale, (n, size))
    path = np.empty((n, size))
    path[0] = shocks[0] / np.sqrt(1.0 - phi ** 2)
    for t in range(1, n):
        path[t] = phi * path[t - 1] + shocks[t]
    return path


def _factor_loadings(u: np.ndarray, decay: float) -> np.ndarray:
    x = u / decay
    slope = (1.0 - np.exp(-x)) / x
    return np.column_stack([np.ones_like(u), slope, slope - np.exp(-x)])


def synth_generate(config: SynthConfig, seed: int) -> SynthData:
    """
    Generates a synthetic quote panel, macro panel and ground-truth UFR path.

    Args:
        config: Generator settings
        seed: Root seed

    Returns:
        SynthData: (panel, macro, truth)
    """
    macro_rng, ufr_rng, factor_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    n = config.n_months
    dates = pd.date_range(config.start, periods=n, freq=pd.offsets.MonthEnd())

    group_factors = _ar1(macro_rng, n, len(MACRO_GROUPS), config.macro_persistence, 1.0)
    columns, groups, blocks = [], {}, []
    for g, group in enumerate(MACRO_GROUPS):
        noise = macro_rng.normal(0.0, 0.5, (n, config.vars_per_group))
        blocks.append(group_factors[:, [g]] + noise)
        for k in range(config.vars_per_group):
            name = f"{_slug(group)}_{k + 1}"
            columns.append(name)
            groups[name] = group
    values = np.hstack(blocks)
    macro = FeaturePanel(pd.DataFrame(values, index=dates, columns=columns), groups)

    loadings = macro_rng.normal(0.0, 1.0, len(MACRO_GROUPS))
    group_means = values.reshape(n, len(MACRO_GROUPS), config.vars_per_group).mean(axis=2)
    signal = group_means @ loadings
    signal = (signal - signal.mean()) / signal.std() if signal.std() > 0 else np.zeros(n)

    f_path = np.empty(n)
    f_path[0] = config.ufr_start
    shocks = ufr_rng.normal(0.0, 1.0, n)
    for t in range(1, n):
        f_path[t] = f_path[t - 1] + config.ufr_drift + config.ufr_vol * (config.signal_strength * signal[t - 1] + shocks[t])

    grid = TermGrid(config.maturities)
    u = grid.u
    factor_means = np.array([0.0, -0.01, 0.0])
    factor_scales = np.array([0.002, 0.004, 0.004]) * np.sqrt(1.0 - config.factor_persistence ** 2)
    factors = factor_means + _ar1(factor_rng, n, 3, config.factor_persistence, 1.0) * factor_scales
    deviations = factors @ _factor_loadings(u, config.factor_decay).T
    rows = f_path[:, None] + config.xi_noise * deviations
    panel = QuotePanel(pd.DataFrame(rows, index=dates, columns=list(grid.maturities)))
    truth = UfrSeries(dates, f_path, 'TRUTH')
    logger.info(f"Generated synthetic panel: {n} months, {len(columns)} macro variables, seed={seed}")
    return SynthData(panel, macro, truth)
