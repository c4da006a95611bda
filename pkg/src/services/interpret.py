"""
Shapley attributions for fitted forecasters, with group-level aggregation.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import DomainError, GroupMappingError

logger = logging.getLogger(__name__)

EXACT_LIMIT = 12
EXACT_METHOD = 'exact enumeration'
SAMPLED_METHOD = 'sampled permutation approximation'


@dataclass
class Attribution:
    """Shapley values of one prediction against a background distribution."""

    values: np.ndarray
    baseline: float
    prediction: float
    std_errors: np.ndarray
    efficiency_se: float
    method: str

    @property
    def efficiency_gap(self) -> float:
        return float(self.values.sum() - (self.prediction - self.baseline))


def _predictor(model):
    return model.predict if hasattr(model, 'predict') else model


def _coalition_values(predict, background: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = x.size
    values = np.empty(2 ** d)
    for code in range(2 ** d):
        mask = np.array([(code >> j) & 1 for j in range(d)], dtype=bool)
        values[code] = float(np.mean(predict(np.where(mask, x, background))))
    return values


def _exact(predict, background: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = x.size
    v = _coalition_values(predict, background, x)
    weights = [math.factorial(k) * math.factorial(d - k - 1) / math.factorial(d) for k in range(d)]
    phi = np.zeros(d)
    for code in range(2 ** d):
        size = bin(code).count('1')
        for j in range(d):
            if not (code >> j) & 1:
                phi[j] += weights[size] * (v[code | (1 << j)] - v[code])
    return phi


def sampled_shapley(model, background, x, n_perms: int = 200, seed=0,
                    exact_limit: int = EXACT_LIMIT) -> Attribution:
    """
    Shapley attribution of model(x) relative to the mean prediction on background.

    Up to exact_limit features every coalition is enumerated, with absent
    features averaged over the background rows. Beyond that, each of n_perms
    random permutations draws one background row and credits each feature with
    the prediction change when it is switched to x along the permutation.

    Args:
        model: Fitted estimator (or callable) mapping rows to predictions
        background: Reference rows, typically the training window
        x: Row to explain
        n_perms: Permutations for the sampled estimator
        seed: Seed or SeedSequence for the sampled estimator
        exact_limit: Largest feature count explained exactly

    Returns:
        Attribution: Values, baseline, prediction and Monte-Carlo errors
    """
    predict = _predictor(model)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if background.shape[0] == 0:
        raise DomainError("Background set is empty")
    if background.shape[1] != x.size:
        raise DomainError(f"Row has {x.size} features, background has {background.shape[1]}")
    if n_perms < 1:
        raise DomainError("n_perms must be at least 1")

    baseline = float(np.mean(predict(background)))
    prediction = float(np.ravel(predict(x[None, :]))[0])
    d = x.size

    if d <= exact_limit:
        values = _exact(predict, background, x)
        return Attribution(values, baseline, prediction, np.zeros(d), 0.0, EXACT_METHOD)

    rng = np.random.default_rng(seed)
    contributions = np.empty((n_perms, d))
    for p in range(n_perms):
        order = rng.permutation(d)
        chain = np.repeat(background[rng.integers(background.shape[0])][None, :], d + 1, axis=0)
        for step, j in enumerate(order, start=1):
            chain[step:, j] = x[j]
        outputs = np.ravel(predict(chain))
        contributions[p, order] = np.diff(outputs)

    values = contributions.mean(axis=0)
    if n_perms > 1:
        std_errors = contributions.std(axis=0, ddof=1) / math.sqrt(n_perms)
        efficiency_se = float(contributions.sum(axis=1).std(ddof=1) / math.sqrt(n_perms))
    else:
        std_errors, efficiency_se = np.full(d, np.nan), float('nan')
    return Attribution(values, baseline, prediction, std_errors, efficiency_se, SAMPLED_METHOD)


def explain_instances(model, background, X, n_perms: int = 200, seed: int = 0,
                      exact_limit: int = EXACT_LIMIT) -> List[Attribution]:
    """Attributions for every row of X, each with its own derived seed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    streams = np.random.SeedSequence(seed).spawn(X.shape[0])
    attrs = [sampled_shapley(model, background, row, n_perms, stream, exact_limit) for row, stream in zip(X, streams)]
    logger.info(f"Explained {len(attrs)} predictions ({attrs[0].method if attrs else 'none'})")
    return attrs


def attribution_frame(attrs: Sequence[Attribution], names: Sequence[str], index=None) -> pd.DataFrame:
    """Instances x features table of Shapley values, plus baseline and prediction."""
    frame = pd.DataFrame([a.values for a in attrs], columns=list(names), index=index)
    frame['baseline'] = [a.baseline for a in attrs]
    frame['prediction'] = [a.prediction for a in attrs]
    return frame


def rank_features(attrs: Sequence[Attribution], names: Sequence[str]) -> pd.Series:
    """Mean absolute Shapley value per feature, largest first."""
    if not attrs:
        raise DomainError("No attributions to rank")
    values = np.abs(np.vstack([a.values for a in attrs])).mean(axis=0)
    return pd.Series(values, index=list(names), name='mean_abs_shap').sort_values(ascending=False, kind='mergesort')


def group_aggregate(attrs: Sequence[Attribution], names: Sequence[str], groups: Dict[str, str],
                    mode: str = 'abs', order: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Group-level attributions.

    Per instance, 'abs' sums |value| over a group's features and 'signed' sums
    the raw values. The table reports the total and mean over instances,
    ranked by mean in descending order. Ties keep the given group order,
    with groups missing from it after the listed ones.

    Raises:
        GroupMappingError: A feature has no group
    """
    if mode not in ('abs', 'signed'):
        raise DomainError(f"Unknown aggregation mode {mode}")
    if not attrs:
        raise DomainError("No attributions to aggregate")
    missing = [name for name in names if name not in groups]
    if missing:
        raise GroupMappingError(f"Feature {missing[0]} has no group")
    matrix = np.vstack([a.values for a in attrs])
    if mode == 'abs':
        matrix = np.abs(matrix)
    labels = list(dict.fromkeys(groups[name] for name in names))
    if order is not None:
        labels = list(dict.fromkeys(list(order) + labels))
    per_group = {}
    for group in labels:
        columns = [j for j, name in enumerate(names) if groups[name] == group]
        if columns:
            per_group[group] = matrix[:, columns].sum(axis=1)
    table = pd.DataFrame({
        'total': {g: float(v.sum()) for g, v in per_group.items()},
        'mean': {g: float(v.mean()) for g, v in per_group.items()},
    })
    table.index.name = 'group'
    return table.sort_values('mean', ascending=False, kind='mergesort')
