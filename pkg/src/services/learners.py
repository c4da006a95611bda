"""
Forecasting learners: linear, factor and tree models behind one fit/predict contract.

Every model is a scikit-learn style estimator so the rolling harness can clone
and refit it per window. Neural networks live in neural_nets.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_is_fitted

from ..errors import ConvergenceError, DomainError
from .data_io import MACRO_GROUPS, YIELD_GROUP, FeaturePanel
from .neural_nets import ARCHITECTURES, MLPRegressorNet

logger = logging.getLogger(__name__)

MAX_SWEEPS = 10000
CD_TOLERANCE = 1e-9


@dataclass
class Dataset:
    """Regression design: dated features, target and a group label per column."""

    X: pd.DataFrame
    y: pd.Series
    groups: List[str]

    def __post_init__(self):
        if len(self.X) != len(self.y):
            raise DomainError(f"X has {len(self.X)} rows but y has {len(self.y)}")
        if len(self.groups) != self.X.shape[1]:
            raise DomainError("One group label is needed per feature column")
        if not np.all(np.isfinite(self.X.to_numpy(dtype=float))) or not np.all(np.isfinite(self.y.to_numpy(dtype=float))):
            raise DomainError("Dataset contains non-finite values")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def feature_names(self) -> List[str]:
        return list(self.X.columns)

    def rows(self, start: int, stop: int) -> 'Dataset':
        return Dataset(self.X.iloc[start:stop], self.y.iloc[start:stop], self.groups)


def _check_xy(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("Empty or non-matrix feature array")
    if not np.all(np.isfinite(X)):
        raise DomainError("Features contain non-finite values")
    if y is None:
        return X
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0] or not np.all(np.isfinite(y)):
        raise DomainError("Target must be finite with one value per row")
    return X, y


def _least_squares(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DomainError(f"Design matrix is rank deficient ({design.shape[1]} columns)")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coef


# Linear models

class OLSRegressor(BaseEstimator, RegressorMixin):
    """Ordinary least squares."""

    def __init__(self, fit_intercept: bool = True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        design = np.column_stack([np.ones(len(y)), X]) if self.fit_intercept else X
        coef = _least_squares(design, y)
        self.intercept_ = float(coef[0]) if self.fit_intercept else 0.0
        self.coef_ = coef[1:] if self.fit_intercept else coef
        return self

    def predict(self, X):
        check_is_fitted(self, 'coef_')
        return _check_xy(X) @ self.coef_ + self.intercept_


def soft_threshold(value: float, threshold: float) -> float:
    return math.copysign(max(abs(value) - threshold, 0.0), value)


class PenalizedRegressor(BaseEstimator, RegressorMixin):
    """
    Ridge, lasso or elastic net on the loss 0.5 * RSS + penalty.

    The penalty is lam * (mu * |b|_1 + (1 - mu) / 2 * |b|_2^2); ridge is mu = 0,
    lasso mu = 1. The intercept is never penalized.
    """

    def __init__(self, penalty: str = 'ridge', lam: float = 1.0, mu: float = 0.5,
                 max_sweeps: int = MAX_SWEEPS, tol: float = CD_TOLERANCE):
        self.penalty = penalty
        self.lam = lam
        self.mu = mu
        self.max_sweeps = max_sweeps
        self.tol = tol

    def _mixing(self) -> float:
        if self.penalty == 'ridge':
            return 0.0
        if self.penalty == 'lasso':
            return 1.0
        if self.penalty == 'enet':
            return float(self.mu)
        raise DomainError(f"Unknown penalty: {self.penalty}")

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        mu = self._mixing()
        if self.lam < 0 or not 0.0 <= mu <= 1.0:
            raise DomainError(f"Invalid penalty settings lam={self.lam}, mu={mu}")
        x_mean, y_mean = X.mean(axis=0), y.mean()
        Xc, yc = X - x_mean, y - y_mean

        if mu == 0.0:
            gram = Xc.T @ Xc + self.lam * np.eye(X.shape[1])
            coef = np.linalg.solve(gram, Xc.T @ yc) if self.lam > 0 else _least_squares(Xc, yc)
            self.n_iter_ = 0
        else:
            coef, self.n_iter_ = self._coordinate_descent(Xc, yc, mu)

        self.coef_ = coef
        self.intercept_ = float(y_mean - x_mean @ coef)
        return self

    def _coordinate_descent(self, X: np.ndarray, y: np.ndarray, mu: float):
        n_features = X.shape[1]
        norms = np.einsum('ij,ij->j', X, X)
        l1 = self.lam * mu
        l2 = self.lam * (1.0 - mu)
        coef = np.zeros(n_features)
        residual = y.copy()
        for sweep in range(1, self.max_sweeps + 1):
            max_change = 0.0
            for j in range(n_features):
                if norms[j] == 0.0:
                    continue
                old = coef[j]
                rho = X[:, j] @ residual + norms[j] * old
                coef[j] = soft_threshold(rho, l1) / (norms[j] + l2)
                if coef[j] != old:
                    residual -= X[:, j] * (coef[j] - old)
                    max_change = max(max_change, abs(coef[j] - old))
            if max_change < self.tol:
                return coef, sweep
        raise ConvergenceError(f"Coordinate descent did not converge in {self.max_sweeps} sweeps", self.max_sweeps)

    def predict(self, X):
        check_is_fitted(self, 'coef_')
        return _check_xy(X) @ self.coef_ + self.intercept_


# Factor models

class PcaResult(NamedTuple):
    components: np.ndarray
    scores: np.ndarray
    explained_ratio: np.ndarray
    singular_values: np.ndarray
    mean: np.ndarray
    scale: np.ndarray


def _numerical_rank(singular_values: np.ndarray, shape) -> int:
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0
    tol = singular_values[0] * max(shape) * np.finfo(float).eps
    return int(np.sum(singular_values > tol))


def pca(X, k: int, standardize: bool = True) -> PcaResult:
    """
    Principal components by SVD of the centred (and optionally scaled) matrix.

    Each component's sign is set so its largest-magnitude loading is positive.

    Raises:
        DomainError: k outside [1, rank]
    """
    X = _check_xy(X)
    mean = X.mean(axis=0)
    scale = X.std(axis=0) if standardize else np.ones(X.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    Z = (X - mean) / scale
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    rank = _numerical_rank(s, Z.shape)
    if not 1 <= k <= rank:
        raise DomainError(f"Number of components {k} outside [1, {rank}]")
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    energy = s ** 2
    return PcaResult(components, Z @ components.T, energy[:k] / energy.sum(), s, mean, scale)


class PCRRegressor(BaseEstimator, RegressorMixin):
    """OLS on the first k principal-component scores."""

    def __init__(self, n_components: int = 3, standardize: bool = True):
        self.n_components = n_components
        self.standardize = standardize

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.pca_ = pca(X, self.n_components, self.standardize)
        self.ols_ = OLSRegressor().fit(self.pca_.scores, y)
        return self

    def transform(self, X):
        check_is_fitted(self, 'pca_')
        return ((_check_xy(X) - self.pca_.mean) / self.pca_.scale) @ self.pca_.components.T

    def predict(self, X):
        return self.ols_.predict(self.transform(X))


class PLSRegressor(BaseEstimator, RegressorMixin):
    """Single-target PLS by NIPALS with X and y deflation."""

    def __init__(self, n_components: int = 3):
        self.n_components = n_components

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        x_mean, y_mean = X.mean(axis=0), y.mean()
        E, f = X - x_mean, y - y_mean
        rank = _numerical_rank(np.linalg.svd(E, compute_uv=False), E.shape)
        if not 1 <= self.n_components <= rank:
            raise DomainError(f"Number of components {self.n_components} outside [1, {rank}]")

        weights, loadings, y_loadings = [], [], []
        for _ in range(self.n_components):
            w = E.T @ f
            norm = np.linalg.norm(w)
            if norm <= 1e-12 * max(1.0, np.linalg.norm(X)):
                break
            w /= norm
            t = E @ w
            tt = t @ t
            p = E.T @ t / tt
            q = f @ t / tt
            E = E - np.outer(t, p)
            f = f - q * t
            weights.append(w)
            loadings.append(p)
            y_loadings.append(q)

        if weights:
            W, P, q = np.column_stack(weights), np.column_stack(loadings), np.array(y_loadings)
            self.coef_ = W @ np.linalg.solve(P.T @ W, q)
        else:
            self.coef_ = np.zeros(X.shape[1])
        self.n_fitted_components_ = len(weights)
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        return self

    def predict(self, X):
        check_is_fitted(self, 'coef_')
        return _check_xy(X) @ self.coef_ + self.intercept_


def pca_first_per_group(panel: FeaturePanel) -> pd.DataFrame:
    """
    First principal component of each macro group, scaled to unit variance.

    Args:
        panel: Feature panel with group labels

    Returns:
        pd.DataFrame: One score column per macro group present, canonical order
    """
    scores = {}
    for group in panel.group_names():
        if group == YIELD_GROUP:
            continue
        columns = panel.group_columns(group)
        if not columns:
            raise DomainError(f"Group {group} is empty")
        score = pca(panel.data[columns].to_numpy(dtype=float), 1).scores[:, 0]
        spread = score.std()
        scores[group] = score / spread if spread > 0 else score
    return pd.DataFrame(scores, index=panel.dates)


class GroupFirstComponent(BaseEstimator, TransformerMixin):
    """Keeps yield columns and replaces each macro group by its first component."""

    def __init__(self, groups: Optional[Sequence[str]] = None):
        self.groups = groups

    def fit(self, X, y=None):
        X = _check_xy(X)
        labels = list(self.groups) if self.groups is not None else [YIELD_GROUP] * X.shape[1]
        if len(labels) != X.shape[1]:
            raise DomainError("One group label is needed per feature column")
        self.passthrough_ = [j for j, g in enumerate(labels) if g == YIELD_GROUP]
        self.blocks_ = []
        for group in MACRO_GROUPS:
            columns = [j for j, g in enumerate(labels) if g == group]
            if columns:
                self.blocks_.append((columns, pca(X[:, columns], 1)))
        return self

    def transform(self, X):
        check_is_fitted(self, 'blocks_')
        X = _check_xy(X)
        parts = [X[:, self.passthrough_]]
        for columns, result in self.blocks_:
            parts.append(((X[:, columns] - result.mean) / result.scale) @ result.components.T)
        return np.hstack(parts)


# Trees

@dataclass
class TreeNode:
    value: float
    feature: int = -1
    threshold: float = float('nan')
    left: Optional['TreeNode'] = None
    right: Optional['TreeNode'] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())

    def n_leaves(self) -> int:
        return 1 if self.is_leaf else self.left.n_leaves() + self.right.n_leaves()

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        self._fill(X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, X, rows, out):
        if self.is_leaf:
            out[rows] = self.value
            return
        goes_left = X[rows, self.feature] <= self.threshold
        self.left._fill(X, rows[goes_left], out)
        self.right._fill(X, rows[~goes_left], out)


class _TreeGrower:
    """
    Greedy second-order tree growth.

    Leaf weight is G / (H + reg_lambda); a split needs a gain above a relative
    round-off floor after subtracting gamma. Squared-error CART is the case
    grad = y, hess = 1, reg_lambda = 0.
    """

    def __init__(self, max_depth, min_leaf, reg_lambda, gamma, feature_frac=1.0, rng=None):
        if min_leaf < 1:
            raise DomainError("min_leaf must be at least 1")
        if reg_lambda < 0 or gamma < 0:
            raise DomainError("reg_lambda and gamma must be non-negative")
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.reg_lambda = float(reg_lambda)
        self.gamma = float(gamma)
        self.feature_frac = feature_frac
        self.rng = rng

    def grow(self, X, grad, hess) -> TreeNode:
        if X.shape[0] == 0:
            raise DomainError("Cannot grow a tree on an empty dataset")
        self.X, self.grad, self.hess = X, grad, hess
        self.floor = 1e-12 * float(grad @ grad)
        return self._node(np.arange(X.shape[0]), 0)

    def _candidate_features(self) -> np.ndarray:
        n_features = self.X.shape[1]
        if self.rng is None or self.feature_frac >= 1.0:
            return np.arange(n_features)
        k = max(1, int(math.ceil(self.feature_frac * n_features)))
        return np.sort(self.rng.choice(n_features, k, replace=False))

    def _node(self, rows, depth) -> TreeNode:
        g_sum, h_sum = self.grad[rows].sum(), self.hess[rows].sum()
        node = TreeNode(value=float(g_sum / (h_sum + self.reg_lambda)))
        if (self.max_depth is not None and depth >= self.max_depth) or rows.size < 2 * self.min_leaf:
            return node
        split = self._best_split(rows, g_sum, h_sum)
        if split is None:
            return node
        feature, threshold = split
        goes_left = self.X[rows, feature] <= threshold
        node.feature, node.threshold = int(feature), float(threshold)
        node.left = self._node(rows[goes_left], depth + 1)
        node.right = self._node(rows[~goes_left], depth + 1)
        return node

    def _best_split(self, rows, g_sum, h_sum):
        lam = self.reg_lambda
        parent = g_sum ** 2 / (h_sum + lam)
        n = rows.size
        counts = np.arange(1, n)
        valid_size = (counts >= self.min_leaf) & (n - counts >= self.min_leaf)
        best_gain, best = self.floor, None
        for feature in self._candidate_features():
            values = self.X[rows, feature]
            order = np.argsort(values, kind='mergesort')
            xs = values[order]
            g_left = np.cumsum(self.grad[rows][order])[:-1]
            h_left = np.cumsum(self.hess[rows][order])[:-1]
            with np.errstate(divide='ignore', invalid='ignore'):
                gain = 0.5 * (g_left ** 2 / (h_left + lam) + (g_sum - g_left) ** 2 / (h_sum - h_left + lam) - parent) - self.gamma
            gain = np.where(valid_size & (xs[:-1] < xs[1:]), gain, -np.inf)
            if gain.size == 0:
                continue
            i = int(np.argmax(gain))
            if gain[i] > best_gain:
                best_gain, best = gain[i], (feature, 0.5 * (xs[i] + xs[i + 1]))
        return best


class RegressionTree(BaseEstimator, RegressorMixin):
    """Least-squares regression tree with mean-valued leaves."""

    def __init__(self, max_depth: Optional[int] = 3, min_leaf: int = 1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.tree_ = _TreeGrower(self.max_depth, self.min_leaf, 0.0, 0.0).grow(X, y, np.ones_like(y))
        return self

    def predict(self, X):
        check_is_fitted(self, 'tree_')
        return self.tree_.predict(_check_xy(X))


class RandomForest(BaseEstimator, RegressorMixin):
    """Bagged regression trees with per-split feature subsampling."""

    def __init__(self, n_estimators: int = 100, max_depth: Optional[int] = 4, min_leaf: int = 5,
                 feature_frac: float = 1.0 / 3.0, seed: int = 0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_frac = feature_frac
        self.seed = seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        if self.n_estimators < 1 or not 0.0 < self.feature_frac <= 1.0:
            raise DomainError("Forest needs n_estimators >= 1 and feature_frac in (0, 1]")
        n = len(y)
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_estimators):
            rng = np.random.default_rng(child)
            rows = rng.integers(0, n, n)
            grower = _TreeGrower(self.max_depth, self.min_leaf, 0.0, 0.0, self.feature_frac, rng)
            self.trees_.append(grower.grow(X[rows], y[rows], np.ones(n)))
        return self

    def predict_members(self, X) -> np.ndarray:
        check_is_fitted(self, 'trees_')
        X = _check_xy(X)
        return np.stack([tree.predict(X) for tree in self.trees_])

    def predict(self, X):
        return np.mean(self.predict_members(X), axis=0)


class GradientBoosting(BaseEstimator, RegressorMixin):
    """
    Squared-loss boosting: F0 = mean(y), then each stage fits a tree to the
    current residuals and adds learning_rate times its output.

    With reg_lambda = gamma = 0 this is plain GBRT; positive values give the
    regularized second-order (XGBoost-style) leaf weights and split gains.
    """

    def __init__(self, n_estimators: int = 100, learning_rate: float = 0.1, max_depth: Optional[int] = 3,
                 min_leaf: int = 1, reg_lambda: float = 0.0, gamma: float = 0.0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.reg_lambda = reg_lambda
        self.gamma = gamma

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        if not 0.0 < self.learning_rate <= 1.0:
            raise DomainError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.n_estimators < 0:
            raise DomainError("n_estimators must be non-negative")
        grower = _TreeGrower(self.max_depth, self.min_leaf, self.reg_lambda, self.gamma)
        self.init_ = float(y.mean())
        current = np.full_like(y, self.init_)
        hess = np.ones_like(y)
        self.trees_ = []
        for _ in range(self.n_estimators):
            tree = grower.grow(X, y - current, hess)
            current = current + self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
        return self

    def staged_predict(self, X):
        check_is_fitted(self, 'trees_')
        X = _check_xy(X)
        current = np.full(X.shape[0], self.init_)
        yield current.copy()
        for tree in self.trees_:
            current = current + self.learning_rate * tree.predict(X)
            yield current.copy()

    def predict(self, X):
        *_, last = self.staged_predict(X)
        return last


# Operations on Dataset

def fit_ols(ds: Dataset, fit_intercept: bool = True) -> OLSRegressor:
    return OLSRegressor(fit_intercept).fit(ds.X, ds.y)


def fit_penalized(ds: Dataset, penalty: str, lam: float, mu: float = 0.5) -> PenalizedRegressor:
    return PenalizedRegressor(penalty, lam, mu).fit(ds.X, ds.y)


def fit_pcr(ds: Dataset, k: int) -> PCRRegressor:
    return PCRRegressor(k).fit(ds.X, ds.y)


def fit_pls(ds: Dataset, k: int) -> PLSRegressor:
    return PLSRegressor(k).fit(ds.X, ds.y)


def fit_tree(ds: Dataset, max_depth: Optional[int] = 3, min_leaf: int = 1) -> RegressionTree:
    return RegressionTree(max_depth, min_leaf).fit(ds.X, ds.y)


def fit_forest(ds: Dataset, n_estimators: int = 100, max_depth: Optional[int] = 4, min_leaf: int = 5,
               feature_frac: float = 1.0 / 3.0, seed: int = 0) -> RandomForest:
    return RandomForest(n_estimators, max_depth, min_leaf, feature_frac, seed).fit(ds.X, ds.y)


def fit_gbrt(ds: Dataset, n_estimators: int = 100, learning_rate: float = 0.1,
             max_depth: Optional[int] = 3) -> GradientBoosting:
    return GradientBoosting(n_estimators, learning_rate, max_depth).fit(ds.X, ds.y)


def fit_xgb(ds: Dataset, n_estimators: int = 100, learning_rate: float = 0.1, max_depth: Optional[int] = 3,
            reg_lambda: float = 1.0, gamma: float = 0.0) -> GradientBoosting:
    return GradientBoosting(n_estimators, learning_rate, max_depth, 1, reg_lambda, gamma).fit(ds.X, ds.y)


# Model specifications

@dataclass(frozen=True)
class ModelSpec:
    """Model kind plus kind-specific hyperparameters."""

    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    KINDS = ('OLS', 'Ridge', 'Lasso', 'ElasticNet', 'PCR', 'PLS', 'Tree', 'Forest', 'GBRT', 'XGB', 'MLP')

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"Unknown model kind: {self.kind}")


PRESETS: Dict[str, ModelSpec] = {
    'ols': ModelSpec('OLS'),
    'ridge': ModelSpec('Ridge', {'lam': 10.0}),
    'lasso': ModelSpec('Lasso', {'lam': 5.0}),
    'enet': ModelSpec('ElasticNet', {'lam': 5.0, 'mu': 0.5}),
    'pcr3': ModelSpec('PCR', {'n_components': 3}),
    'pcr5': ModelSpec('PCR', {'n_components': 5}),
    'pcr10': ModelSpec('PCR', {'n_components': 10}),
    'pls3': ModelSpec('PLS', {'n_components': 3}),
    'pls5': ModelSpec('PLS', {'n_components': 5}),
    'pls10': ModelSpec('PLS', {'n_components': 10}),
    'tree': ModelSpec('Tree', {'max_depth': 3, 'min_leaf': 5}),
    'forest': ModelSpec('Forest', {'n_estimators': 200, 'max_depth': 4, 'min_leaf': 5, 'feature_frac': 1.0 / 3.0}),
    'gbrt': ModelSpec('GBRT', {'n_estimators': 100, 'learning_rate': 0.05, 'max_depth': 2, 'min_leaf': 5}),
    'xgb': ModelSpec('XGB', {'n_estimators': 100, 'learning_rate': 0.05, 'max_depth': 2, 'min_leaf': 5,
                             'reg_lambda': 1.0, 'gamma': 0.0}),
    'yield_only_net': ModelSpec('MLP', {'architecture': 'YieldOnly', 'hidden': (32, 16, 8)}),
    'yield_macro_net': ModelSpec('MLP', {'architecture': 'YieldMacro', 'hidden': (32, 16, 8)}),
    'hybrid_net': ModelSpec('MLP', {'architecture': 'Hybrid', 'hidden': (32,)}),
    'double_net': ModelSpec('MLP', {'architecture': 'Double', 'hidden': (32, 16), 'macro_hidden': (32, 16)}),
    'group_ensemble_net': ModelSpec('MLP', {'architecture': 'GroupEnsemble', 'group_nodes': 2, 'combiner_nodes': 3}),
}


def resolve_spec(name_or_spec, seed: int = 0) -> ModelSpec:
    """Looks up a preset by name, attaching the seed."""
    if isinstance(name_or_spec, ModelSpec):
        return name_or_spec
    if name_or_spec not in PRESETS:
        raise DomainError(f"Unknown model preset: {name_or_spec}. Available: {', '.join(PRESETS)}")
    preset = PRESETS[name_or_spec]
    return ModelSpec(preset.kind, dict(preset.params), seed)


def build_model(spec: ModelSpec, groups: Optional[Sequence[str]] = None,
                mlp_defaults: Optional[Dict[str, Any]] = None):
    """
    Builds an unfitted estimator for a spec.

    Args:
        spec: Model specification
        groups: Group label per feature column
        mlp_defaults: Training defaults (epochs, lr, l2, batch_size) for networks

    Returns:
        Estimator with fit/predict
    """
    params = dict(spec.params)
    kind = spec.kind
    has_macro = groups is not None and any(g != YIELD_GROUP for g in groups)
    if kind == 'OLS':
        if has_macro:
            return Pipeline([('groups', GroupFirstComponent(list(groups))), ('ols', OLSRegressor(**params))])
        return OLSRegressor(**params)
    if kind == 'Ridge':
        return PenalizedRegressor('ridge', params.get('lam', 1.0))
    if kind == 'Lasso':
        return PenalizedRegressor('lasso', params.get('lam', 1.0))
    if kind == 'ElasticNet':
        return PenalizedRegressor('enet', params.get('lam', 1.0), params.get('mu', 0.5))
    if kind == 'PCR':
        return PCRRegressor(**params)
    if kind == 'PLS':
        return PLSRegressor(**params)
    if kind == 'Tree':
        return RegressionTree(**params)
    if kind == 'Forest':
        return RandomForest(seed=spec.seed, **params)
    if kind == 'GBRT':
        return GradientBoosting(**params)
    if kind == 'XGB':
        return GradientBoosting(**params)
    settings = dict(mlp_defaults or {})
    settings.update(params)
    if settings.get('architecture') not in ARCHITECTURES:
        raise DomainError(f"Unknown network architecture: {settings.get('architecture')}")
    return MLPRegressorNet(groups=list(groups) if groups is not None else None, seed=spec.seed, **settings)
