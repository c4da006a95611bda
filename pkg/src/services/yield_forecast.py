"""
UFR-based yield projection: a forecast UFR is pushed through the frozen
Smith-Wilson weights of date t to give next-period prices and yields.
"""
import dataclasses
import logging
from typing import Any, Dict, NamedTuple

import numpy as np
import pandas as pd

from ..errors import DomainError, ProjectionError
from .curve_core import QuotePanel, SmithWilsonCurve, discount, fit_zero_coupon_curve
from .forecast_harness import ForecastRun, evaluate, yield_column
from .ufr_extract import UfrSeries

logger = logging.getLogger(__name__)


class CurveForecast(NamedTuple):
    f_inf: float
    prices: np.ndarray
    yields: np.ndarray
    curve: SmithWilsonCurve


class CurveEvaluation(NamedTuple):
    report: Dict[str, Any]
    predictions: pd.DataFrame
    benchmark: pd.DataFrame
    actuals: pd.DataFrame


def forecast_ufr_level(ufr_t: float, delta_hat: float) -> float:
    """Next-period UFR level from the current level and a forecast change."""
    return float(ufr_t) + float(delta_hat)


def project_curve(curve: SmithWilsonCurve, ufr_hat: float) -> CurveForecast:
    """
    Prices and yields at the grid maturities with f_inf replaced by ln(1 + ufr_hat).

    Alpha, the grid and the weights xi stay as fitted. An unchanged UFR reuses
    the fitted f_inf, so the projection reproduces the fitted curve exactly.

    Raises:
        DomainError: ufr_hat <= -1
        ProjectionError: A projected price is not positive
    """
    if not np.isfinite(ufr_hat) or ufr_hat <= -1.0:
        raise DomainError(f"Forecast UFR must exceed -1, got {ufr_hat}")
    f_hat = curve.f_inf if ufr_hat == curve.ufr else float(np.log1p(ufr_hat))
    projected = dataclasses.replace(curve, f_inf=f_hat)
    u = curve.grid.u
    prices = np.atleast_1d(discount(projected, u))
    for maturity, price in zip(u, prices):
        if not price > 0.0:
            raise ProjectionError(f"Projected price {price:.6g} is not positive", float(maturity))
    return CurveForecast(f_hat, prices, -np.log(prices) / u, projected)


def evaluate_curve_forecasts(panel: QuotePanel, series: UfrSeries, run: ForecastRun,
                             alpha: float = 0.1) -> CurveEvaluation:
    """
    Per-maturity evaluation of UFR-driven yield forecasts.

    For each out-of-sample date the curve is fitted at the previous panel date
    with that date's f_inf (and selected alpha for ZJW), the forecast UFR change
    is applied and the projected yields are compared with the realised ones.
    The benchmark is the same projection with a zero UFR change, i.e. the
    fitted curve of the previous date.

    Args:
        panel: Yield panel the UFR series was extracted from
        series: Extracted UFR series (its ufr column was the forecast target)
        run: Rolling forecasts of the UFR change
        alpha: Convergence speed when the series has no alpha path

    Returns:
        CurveEvaluation: Report with per_maturity entries plus the yield tables
    """
    positions = {date: i for i, date in enumerate(panel.dates)}
    if not series.dates.equals(panel.dates):
        raise DomainError("UFR series and yield panel must share dates")
    ufr = series.ufr
    columns = [yield_column(u) for u in panel.grid.maturities]
    predicted, benchmark, actual = [], [], []

    for date, delta_hat in zip(run.dates, run.predictions):
        position = positions.get(date)
        if position is None or position == 0:
            raise DomainError(f"Forecast date {date} has no previous panel date")
        previous = position - 1
        f_inf = series.f_inf[previous]
        if not np.isfinite(f_inf):
            raise DomainError(f"No UFR estimate on {panel.dates[previous]}")
        alpha_t = alpha
        if series.alpha_path is not None and np.isfinite(series.alpha_path[previous]):
            alpha_t = float(series.alpha_path[previous])
        curve = fit_zero_coupon_curve(panel.yields.iloc[previous].to_numpy(), panel.grid, alpha_t, f_inf)
        predicted.append(project_curve(curve, forecast_ufr_level(ufr[previous], delta_hat)).yields)
        benchmark.append(project_curve(curve, curve.ufr).yields)
        actual.append(panel.yields.iloc[position].to_numpy())

    index = pd.DatetimeIndex(run.dates, name='date')
    predicted = pd.DataFrame(predicted, index=index, columns=columns)
    benchmark = pd.DataFrame(benchmark, index=index, columns=columns)
    actual = pd.DataFrame(actual, index=index, columns=columns)
    per_maturity = {
        column: evaluate(predicted[column], benchmark[column], actual[column]).to_dict() for column in columns
    }
    logger.info(f"Curve forecasts evaluated: {len(index)} dates x {len(columns)} maturities ({series.method})")
    report = {'method': series.method, 'n': len(index), 'per_maturity': per_maturity}
    return CurveEvaluation(report, predicted, benchmark, actual)
