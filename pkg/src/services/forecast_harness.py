"""
Rolling out-of-sample forecasting and evaluation statistics.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.base import clone
from sklearn.preprocessing import StandardScaler

from ..config.config import derive_seed
from ..errors import DomainError, ForecastError, MetricError
from .curve_core import QuotePanel
from .data_io import YIELD_GROUP, FeaturePanel
from .learners import Dataset, build_model, resolve_spec

logger = logging.getLogger(__name__)

FEATURE_SETS = ('yields_only', 'yields_plus_macro')
MIN_WINDOW = 20
MIN_CW_OBSERVATIONS = 10
# One-sided standard normal quantiles
CW_CRITICAL = (('1%', 2.3263), ('5%', 1.6449), ('10%', 1.2816))
CW_STARS = {'1%': '***', '5%': '**', '10%': '*', 'none': ''}


def difference(series):
    """First difference x_t - x_{t-1}; keeps the index for pandas input."""
    if len(series) < 2:
        raise DomainError("difference needs at least two observations")
    if isinstance(series, pd.Series):
        return series.diff().iloc[1:]
    return np.diff(np.asarray(series, dtype=float))


def yield_column(maturity: float) -> str:
    return f"y{maturity:g}"


def build_dataset(target: pd.Series, panel: QuotePanel, macro: Optional[FeaturePanel] = None,
                  feature_set: str = 'yields_only') -> Dataset:
    """
    Regression design for one-step-ahead forecasts.

    The row dated t+1 holds the yield changes at t (plus macro levels at t)
    and the target change from t to t+1. Rows with a missing value are dropped.

    Args:
        target: Level series to forecast (UFR or a yield), indexed by date
        panel: Yield panel supplying the yield-change features
        macro: Macro panel, required for 'yields_plus_macro'
        feature_set: 'yields_only' or 'yields_plus_macro'

    Returns:
        Dataset: Features, target changes and group labels
    """
    if feature_set not in FEATURE_SETS:
        raise DomainError(f"Unknown feature set {feature_set}; choose from {', '.join(FEATURE_SETS)}")
    if feature_set == 'yields_plus_macro' and macro is None:
        raise DomainError("yields_plus_macro needs a macro panel")

    yields = panel.yields.copy()
    yields.columns = [yield_column(u) for u in yields.columns]
    features = yields.diff()
    groups = [YIELD_GROUP] * features.shape[1]
    if feature_set == 'yields_plus_macro':
        features = features.join(macro.data, how='inner')
        groups += [macro.groups[c] for c in macro.data.columns]

    common = features.index.intersection(target.index)
    lagged = features.loc[common].shift(1)
    change = target.loc[common].astype(float).diff().rename('target')
    frame = pd.concat([lagged, change], axis=1).dropna()
    if frame.empty:
        raise DomainError("No complete rows after aligning target and features")
    logger.debug(f"Dataset: {len(frame)} rows, {len(groups)} features ({feature_set})")
    return Dataset(frame.drop(columns='target'), frame['target'], groups)


@dataclass
class ForecastRun:
    """Out-of-sample predictions, actuals and the random-walk benchmark (zero change)."""

    dates: pd.DatetimeIndex
    predictions: np.ndarray
    actuals: np.ndarray
    window: int
    benchmark: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.benchmark is None:
            self.benchmark = np.zeros(len(self.actuals))
        if not len(self.dates) == len(self.predictions) == len(self.actuals) == len(self.benchmark):
            raise DomainError("Forecast run arrays must have equal lengths")

    def __len__(self) -> int:
        return len(self.actuals)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'prediction': self.predictions, 'actual': self.actuals, 'benchmark': self.benchmark},
                            index=pd.DatetimeIndex(self.dates, name='date'))


def window_length(n: int, window_frac: float = 0.75, window: Optional[int] = None) -> int:
    """Training window: explicit, else floor(window_frac * n)."""
    if window is None:
        if not 0.0 < window_frac < 1.0:
            raise DomainError(f"window_frac must lie in (0, 1), got {window_frac}")
        window = int(math.floor(window_frac * n))
    if window < MIN_WINDOW:
        raise DomainError(f"Training window of {window} rows is below the minimum of {MIN_WINDOW}")
    if n - window < 1:
        raise DomainError(f"Window {window} leaves no out-of-sample step in {n} rows")
    return window


def rolling_forecast(ds: Dataset, model, window_frac: float = 0.75, window: Optional[int] = None,
                     horizon: int = 1, standardize: bool = True) -> ForecastRun:
    """
    Fixed-length rolling window forecasts.

    For each t from w to n - 1 a fresh clone of the model is fitted on rows
    [t - w, t) and predicts row t. Feature scaling and the target scale are
    estimated on the training rows only.

    Raises:
        DomainError: Invalid window or horizon
        ForecastError: A window failed to fit or predict (carries its index)
    """
    if horizon != 1:
        raise DomainError("Only one-step-ahead forecasts are supported")
    n = len(ds)
    w = window_length(n, window_frac, window)
    X = ds.X.to_numpy(dtype=float)
    y = ds.y.to_numpy(dtype=float)
    predictions = np.empty(n - w)

    for i, t in enumerate(range(w, n)):
        try:
            X_train, y_train, X_next = X[t - w:t], y[t - w:t], X[t:t + 1]
            center, scale = 0.0, 1.0
            if standardize:
                scaler = StandardScaler().fit(X_train)
                X_train, X_next = scaler.transform(X_train), scaler.transform(X_next)
                center = float(y_train.mean())
                spread = float(y_train.std())
                scale = spread if spread > 0 else 1.0
            estimator = clone(model)
            estimator.fit(X_train, (y_train - center) / scale)
            predictions[i] = float(np.ravel(estimator.predict(X_next))[0]) * scale + center
        except Exception as e:
            logger.error(f"Rolling window {i} failed: {e}")
            raise ForecastError(str(e), i) from e
        if not np.isfinite(predictions[i]):
            raise ForecastError("non-finite prediction", i)

    logger.info(f"Rolling forecast: {n - w} out-of-sample steps, window {w}")
    return ForecastRun(ds.y.index[w:], predictions, y[w:].copy(), w)


def _aligned(*arrays) -> List[np.ndarray]:
    values = [np.asarray(a, dtype=float).ravel() for a in arrays]
    if len({v.size for v in values}) != 1 or values[0].size == 0:
        raise MetricError("Metric inputs must be non-empty and aligned")
    return values


def rmse(pred, actual) -> float:
    pred, actual = _aligned(pred, actual)
    return float(np.sqrt(np.mean((actual - pred) ** 2)))


def mae(pred, actual) -> float:
    pred, actual = _aligned(pred, actual)
    return float(np.mean(np.abs(actual - pred)))


def r_oos(pred_c, pred_b, actual) -> float:
    """Out-of-sample R^2 of a candidate against a benchmark."""
    pred_c, pred_b, actual = _aligned(pred_c, pred_b, actual)
    sse_b = float(np.sum((actual - pred_b) ** 2))
    if sse_b == 0.0:
        raise MetricError("Benchmark squared error is zero; out-of-sample R^2 is undefined")
    return 1.0 - float(np.sum((actual - pred_c) ** 2)) / sse_b


def cw_adjusted_loss(pred_c, pred_b, actual) -> np.ndarray:
    """
    Clark-West adjusted loss differential, oriented so positive values favour the candidate.

    d = (a - b)^2 - (a - c)^2 - (b - c)^2, the negated modified MSE
    (a - c)^2 - (a - b)^2 + (b - c)^2. Every d is zero when the candidate
    equals the benchmark or the actuals.
    """
    pred_c, pred_b, actual = _aligned(pred_c, pred_b, actual)
    return (actual - pred_b) ** 2 - (actual - pred_c) ** 2 - (pred_b - pred_c) ** 2


class CwResult(NamedTuple):
    stat: float
    band: str


def cw_test(pred_c, pred_b, actual) -> CwResult:
    """
    Clark-West test of a candidate against a nested benchmark.

    The statistic is mean(d) / (sd(d) / sqrt(z)) with a one-sided standard
    normal band, reported only when the candidate's R^2_oos is positive.
    """
    d = cw_adjusted_loss(pred_c, pred_b, actual)
    if d.size < MIN_CW_OBSERVATIONS:
        raise MetricError(f"Clark-West test needs at least {MIN_CW_OBSERVATIONS} observations")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        stat = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        stat = mean / (sd / math.sqrt(d.size))
    try:
        positive = r_oos(pred_c, pred_b, actual) > 0
    except MetricError:
        positive = False
    band = 'none'
    if positive:
        band = next((name for name, critical in CW_CRITICAL if stat > critical), 'none')
    return CwResult(stat, band)


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    mae: float
    r_oos: float
    cw_stat: float
    cw_band: str
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {'rmse': self.rmse, 'mae': self.mae, 'r_oos': self.r_oos,
                'cw_stat': self.cw_stat, 'cw_band': self.cw_band, 'n': self.n}

    @property
    def label(self) -> str:
        """R^2_oos in percent with significance stars."""
        return f"{100.0 * self.r_oos:.2f}{CW_STARS[self.cw_band]}"


def evaluate(pred_c, pred_b, actual) -> EvalReport:
    """Evaluation report of candidate forecasts against a benchmark."""
    cw = cw_test(pred_c, pred_b, actual)
    return EvalReport(rmse(pred_c, actual), mae(pred_c, actual), r_oos(pred_c, pred_b, actual),
                      cw.stat, cw.band, len(np.ravel(actual)))


def evaluate_run(run: ForecastRun) -> EvalReport:
    return evaluate(run.predictions, run.benchmark, run.actuals)


def forecast_runs(datasets: Dict[str, Dataset], models: Iterable[str], seed: int = 0,
                  window_frac: float = 0.75, mlp_defaults: Optional[Dict[str, Any]] = None,
                  horizon: int = 1) -> Dict[Tuple[str, str], ForecastRun]:
    """
    Rolling forecasts for every (target, model) pair.

    Args:
        datasets: Target name to dataset
        models: Preset names
        seed: Root seed; each model gets a derived stream
        window_frac: Training window fraction
        mlp_defaults: Network training defaults
        horizon: Forecast horizon in steps

    Returns:
        Dict: (target, model) to its forecast run, in model-major order
    """
    runs = {}
    for model_name in models:
        for target, ds in datasets.items():
            spec = resolve_spec(model_name, derive_seed(seed, 'model', model_name, target))
            estimator = build_model(spec, ds.groups, mlp_defaults)
            runs[(target, model_name)] = rolling_forecast(ds, estimator, window_frac, horizon=horizon)
    return runs


def summarise_runs(runs: Dict[Tuple[str, str], ForecastRun]) -> pd.DataFrame:
    """One row per (target, model) with the evaluation fields and a label."""
    rows = []
    for (target, model_name), run in runs.items():
        report = evaluate_run(run)
        rows.append({'target': target, 'model': model_name, **report.to_dict(), 'label': report.label})
        logger.info(f"{model_name} on {target}: r_oos={report.r_oos:.4f} ({report.cw_band})")
    return pd.DataFrame(rows, columns=['target', 'model', 'rmse', 'mae', 'r_oos', 'cw_stat', 'cw_band', 'n', 'label'])


def forecast_table(datasets: Dict[str, Dataset], models: Iterable[str], seed: int = 0,
                   window_frac: float = 0.75, mlp_defaults: Optional[Dict[str, Any]] = None) -> pd.DataFrame:
    """R^2_oos table with Clark-West bands over targets and models."""
    return summarise_runs(forecast_runs(datasets, models, seed, window_frac, mlp_defaults))
