"""
Feed-forward networks for the forecasting menu.

Five architectures share one trainer: full-batch (or seeded mini-batch)
gradient descent on mean squared error plus an L2 penalty on weights.
Hidden layers use ReLU; outputs are linear.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import DomainError, TrainingError
from .data_io import YIELD_GROUP

logger = logging.getLogger(__name__)

ARCHITECTURES = ('YieldOnly', 'YieldMacro', 'Hybrid', 'Double', 'GroupEnsemble')


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


class DenseStack:
    """
    Stack of fully connected layers.

    The last layer starts at zero so a fresh network predicts its bias.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator,
                 output_relu: bool = False, output_bias: bool = True):
        if len(sizes) < 2 or min(sizes) < 1:
            raise DomainError(f"Invalid layer sizes {tuple(sizes)}")
        self.output_relu = output_relu
        self.weights: List[np.ndarray] = []
        self.biases: List[Optional[np.ndarray]] = []
        n_layers = len(sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == n_layers - 1
            if last and not output_relu:
                self.weights.append(np.zeros((fan_in, fan_out)))
            else:
                self.weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out) if (not last or output_bias) else None)

    def parameters(self) -> List[Tuple[np.ndarray, bool]]:
        """(array, is_weight) pairs in a fixed order."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append((w, True))
            if b is not None:
                params.append((b, False))
        return params

    def forward(self, X: np.ndarray):
        inputs, pre = [], []
        a = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w if b is None else a @ w + b
            pre.append(z)
            a = relu(z) if (i < last or self.output_relu) else z
        return a, (inputs, pre)

    def backward(self, cache, delta: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Parameter gradients and the gradient with respect to the stack input."""
        inputs, pre = cache
        last = len(self.weights) - 1
        grads: List[np.ndarray] = []
        for i in range(last, -1, -1):
            if i < last or self.output_relu:
                delta = delta * (pre[i] > 0)
            layer = [inputs[i].T @ delta]
            if self.biases[i] is not None:
                layer.append(delta.sum(axis=0))
            grads = layer + grads
            delta = delta @ self.weights[i].T
        return grads, delta


def _columns(groups: Optional[Sequence[str]], n_features: int):
    labels = list(groups) if groups is not None else [None] * n_features
    if len(labels) != n_features:
        raise DomainError(f"{len(labels)} group labels for {n_features} features")
    yields = [j for j, g in enumerate(labels) if g == YIELD_GROUP]
    macro = [j for j, g in enumerate(labels) if g is not None and g != YIELD_GROUP]
    return labels, yields, macro


class Network:
    """
    Architecture graph.

    Additive form: prediction = bias + sum of heads, each head reading its own
    columns. Group form: one ReLU subnet per group, concatenated into a
    combiner stack with a linear output.
    """

    def __init__(self, architecture: str, n_features: int, groups: Optional[Sequence[str]], rng: np.random.Generator,
                 hidden: Sequence[int] = (32, 16, 8), macro_hidden: Optional[Sequence[int]] = None,
                 group_nodes: int = 2, combiner_nodes: int = 3):
        if architecture not in ARCHITECTURES:
            raise DomainError(f"Unknown architecture {architecture}; choose from {', '.join(ARCHITECTURES)}")
        labels, yields, macro = _columns(groups, n_features)
        self.architecture = architecture
        self.heads: List[Tuple[List[int], DenseStack]] = []
        self.combiner: Optional[DenseStack] = None
        self.bias = np.zeros(1)
        hidden = tuple(hidden)
        macro_hidden = tuple(macro_hidden) if macro_hidden else hidden

        if architecture == 'YieldOnly':
            if not yields:
                raise DomainError("YieldOnly needs yield columns")
            self.heads.append((yields, DenseStack((len(yields),) + hidden + (1,), rng, output_bias=False)))
        elif architecture == 'YieldMacro':
            columns = list(range(n_features))
            self.heads.append((columns, DenseStack((n_features,) + hidden + (1,), rng, output_bias=False)))
        elif architecture in ('Hybrid', 'Double'):
            if not yields or not macro:
                raise DomainError(f"{architecture} needs both yield and macro columns")
            yield_sizes = (len(yields), 1) if architecture == 'Hybrid' else (len(yields),) + hidden + (1,)
            self.heads.append((yields, DenseStack(yield_sizes, rng, output_bias=False)))
            self.heads.append((macro, DenseStack((len(macro),) + macro_hidden + (1,), rng, output_bias=False)))
        else:
            if groups is None:
                raise DomainError("GroupEnsemble needs group labels")
            order = list(dict.fromkeys(labels))
            for group in order:
                columns = [j for j, g in enumerate(labels) if g == group]
                self.heads.append((columns, DenseStack((len(columns), group_nodes), rng, output_relu=True)))
            self.combiner = DenseStack((group_nodes * len(order), combiner_nodes, 1), rng)

    def parameters(self) -> List[Tuple[np.ndarray, bool]]:
        params = []
        for _, stack in self.heads:
            params.extend(stack.parameters())
        if self.combiner is not None:
            params.extend(self.combiner.parameters())
        else:
            params.append((self.bias, False))
        return params

    def forward(self, X: np.ndarray):
        outputs, caches = [], []
        for columns, stack in self.heads:
            out, cache = stack.forward(X[:, columns])
            outputs.append(out)
            caches.append(cache)
        if self.combiner is not None:
            out, combiner_cache = self.combiner.forward(np.hstack(outputs))
            return out[:, 0], (caches, outputs, combiner_cache)
        return sum(o[:, 0] for o in outputs) + self.bias[0], (caches, outputs, None)

    def backward(self, cache, d_out: np.ndarray) -> List[np.ndarray]:
        caches, outputs, combiner_cache = cache
        delta = d_out[:, None]
        grads: List[np.ndarray] = []
        if self.combiner is not None:
            combiner_grads, d_concat = self.combiner.backward(combiner_cache, delta)
            start = 0
            for (_, stack), head_cache, out in zip(self.heads, caches, outputs):
                width = out.shape[1]
                grads.extend(stack.backward(head_cache, d_concat[:, start:start + width])[0])
                start += width
            return grads + combiner_grads
        for (_, stack), head_cache in zip(self.heads, caches):
            grads.extend(stack.backward(head_cache, delta)[0])
        grads.append(np.array([d_out.sum()]))
        return grads


class MLPRegressorNet(BaseEstimator, RegressorMixin):
    """
    Network regressor with an internally standardized target.

    Args:
        architecture: One of ARCHITECTURES
        hidden: Hidden layer widths (macro side too unless macro_hidden is set)
        groups: Group label per feature column ('yields' or a macro group)
        l2: Penalty on the squared weights
        epochs: Passes over the training set
        lr: Fixed learning rate
        batch_size: None for full batch, else seeded mini-batches
        seed: Initialization and shuffling seed
    """

    def __init__(self, architecture: str = 'YieldMacro', hidden: Sequence[int] = (32, 16, 8),
                 macro_hidden: Optional[Sequence[int]] = None, group_nodes: int = 2, combiner_nodes: int = 3,
                 groups: Optional[Sequence[str]] = None, l2: float = 1e-4, epochs: int = 500, lr: float = 1e-3,
                 batch_size: Optional[int] = None, seed: int = 0):
        self.architecture = architecture
        self.hidden = hidden
        self.macro_hidden = macro_hidden
        self.group_nodes = group_nodes
        self.combiner_nodes = combiner_nodes
        self.groups = groups
        self.l2 = l2
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    def loss_and_grads(self, X: np.ndarray, z: np.ndarray):
        """Penalized loss and its gradient for each array of parameters()."""
        prediction, cache = self.network_.forward(X)
        residual = prediction - z
        params = self.network_.parameters()
        penalty = sum(float(np.sum(p ** 2)) for p, is_weight in params if is_weight)
        loss = float(np.mean(residual ** 2) + self.l2 * penalty)
        grads = self.network_.backward(cache, 2.0 * residual / residual.size)
        grads = [g + 2.0 * self.l2 * p if is_weight else g for g, (p, is_weight) in zip(grads, params)]
        return loss, grads

    def parameters(self) -> List[np.ndarray]:
        check_is_fitted(self, 'network_')
        return [p for p, _ in self.network_.parameters()]

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
            raise DomainError("Network needs a non-empty design with one target per row")
        if self.lr <= 0 or self.l2 < 0 or self.epochs < 0:
            raise DomainError("lr must be positive, l2 and epochs non-negative")
        init_rng, shuffle_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(2))
        self.network_ = Network(self.architecture, X.shape[1], self.groups, init_rng, self.hidden,
                                self.macro_hidden, self.group_nodes, self.combiner_nodes)
        self.y_mean_ = float(y.mean())
        spread = float(y.std())
        self.y_scale_ = spread if spread > 0 else 1.0
        z = (y - self.y_mean_) / self.y_scale_

        params = self.parameters()
        loss, _ = self.loss_and_grads(X, z)
        self.loss_curve_ = [loss]
        n = y.size
        batch = n if not self.batch_size else min(int(self.batch_size), n)
        for epoch in range(1, self.epochs + 1):
            order = shuffle_rng.permutation(n) if batch < n else np.arange(n)
            for start in range(0, n, batch):
                rows = order[start:start + batch]
                _, grads = self.loss_and_grads(X[rows], z[rows])
                for p, g in zip(params, grads):
                    p -= self.lr * g
            loss, _ = self.loss_and_grads(X, z)
            if not np.isfinite(loss):
                raise TrainingError(f"{self.architecture}: non-finite loss at epoch {epoch} "
                                    f"(previous loss {self.loss_curve_[-1]:.6g}, lr={self.lr}, l2={self.l2})")
            self.loss_curve_.append(loss)
        logger.debug(f"{self.architecture}: loss {self.loss_curve_[0]:.6f} -> {self.loss_curve_[-1]:.6f}")
        return self

    def predict(self, X):
        check_is_fitted(self, 'network_')
        prediction, _ = self.network_.forward(np.asarray(X, dtype=float))
        return prediction * self.y_scale_ + self.y_mean_


def fit_mlp(ds, architecture: str, hidden: Sequence[int] = (32, 16, 8), l2: float = 1e-4, epochs: int = 500,
            lr: float = 1e-3, seed: int = 0, **kwargs) -> MLPRegressorNet:
    """Fits a network on a Dataset, passing its group labels."""
    model = MLPRegressorNet(architecture, hidden, groups=ds.groups, l2=l2, epochs=epochs, lr=lr, seed=seed, **kwargs)
    return model.fit(ds.X.to_numpy(dtype=float), ds.y.to_numpy(dtype=float))
