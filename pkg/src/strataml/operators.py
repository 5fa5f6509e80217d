"""Native ML operators and the default registry.

A compact set of preprocessors and probabilistic classifiers implemented on
numpy, with the tree split scan and KNN voting delegated to the selected
kernel backend. Every classifier emits per-class probabilities summing to one
per instance; every preprocessor learns its statistics from the training fold
only. Iterative fitters accept a `cancel` callable and invoke it often enough
for cooperative timeouts.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from . import kernels
from .pipeline import HyperparamSpec, OperatorKind, OperatorRegistry, OperatorSpec, PrimitiveNode

__all__ = [
    "StandardScaler",
    "MinMaxScaler",
    "VarianceThreshold",
    "Binarizer",
    "GaussianNB",
    "BernoulliNB",
    "DecisionTree",
    "KNN",
    "LogisticRegression",
    "DEFAULT_REGISTRY",
    "make_estimator",
]

Cancel = Optional[Callable[[], None]]


def _check(cancel: Cancel) -> None:
    if cancel is not None:
        cancel()


# ---------------------------------------------------------------------------
# preprocessors


class StandardScaler:
    """Center to zero mean and unit variance; constant columns stay centered."""

    def fit(self, X, cancel: Cancel = None):
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.scale_ = scale
        return self

    def transform(self, X):
        return (X - self.mean_) / self.scale_


class MinMaxScaler:
    """Map the training range of each feature onto [0, 1]."""

    def fit(self, X, cancel: Cancel = None):
        self.min_ = X.min(axis=0)
        span = X.max(axis=0) - self.min_
        span[span == 0.0] = 1.0
        self.span_ = span
        return self

    def transform(self, X):
        return (X - self.min_) / self.span_


class VarianceThreshold:
    """Drop features whose training variance is <= threshold."""

    def __init__(self, threshold: float = 0.0):
        self.threshold = float(threshold)

    def fit(self, X, cancel: Cancel = None):
        self.keep_ = X.var(axis=0) > self.threshold
        if not self.keep_.any():
            raise ValueError("VarianceThreshold removed every feature")
        return self

    def transform(self, X):
        return X[:, self.keep_]


class Binarizer:
    """Threshold features to {0, 1}."""

    def __init__(self, threshold: float = 0.5):
        self.threshold = float(threshold)

    def fit(self, X, cancel: Cancel = None):
        return self

    def transform(self, X):
        return (X > self.threshold).astype(np.float64)


# ---------------------------------------------------------------------------
# classifiers


def _class_matrix(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        raise ValueError("training fold is missing a class")
    return counts


class GaussianNB:
    """Gaussian naive Bayes with variance smoothing."""

    def fit(self, X, y, n_classes: int, cancel: Cancel = None):
        counts = _class_matrix(y, n_classes)
        self.n_classes_ = n_classes
        self.theta_ = np.empty((n_classes, X.shape[1]))
        self.var_ = np.empty((n_classes, X.shape[1]))
        for c in range(n_classes):
            rows = X[y == c]
            self.theta_[c] = rows.mean(axis=0)
            self.var_[c] = rows.var(axis=0)
        eps = max(1e-9 * float(self.var_.max(initial=0.0)), 1e-12)
        self.var_ += eps
        self.log_prior_ = np.log(counts / counts.sum())
        return self

    def predict_proba(self, X, cancel: Cancel = None):
        n = X.shape[0]
        log_like = np.empty((n, self.n_classes_))
        for c in range(self.n_classes_):
            diff = X - self.theta_[c]
            log_like[:, c] = self.log_prior_[c] - 0.5 * np.sum(
                diff * diff / self.var_[c] + np.log(2.0 * math.pi * self.var_[c]), axis=1
            )
        log_like -= log_like.max(axis=1, keepdims=True)
        proba = np.exp(log_like)
        proba /= proba.sum(axis=1, keepdims=True)
        return proba


class BernoulliNB:
    """Bernoulli naive Bayes over features binarized at `binarize`."""

    def __init__(self, alpha: float = 1.0, binarize: float = 0.5):
        self.alpha = float(alpha)
        self.binarize = float(binarize)

    def fit(self, X, y, n_classes: int, cancel: Cancel = None):
        counts = _class_matrix(y, n_classes)
        xb = X > self.binarize
        self.n_classes_ = n_classes
        ones = np.empty((n_classes, X.shape[1]))
        for c in range(n_classes):
            ones[c] = xb[y == c].sum(axis=0)
        p = (ones + self.alpha) / (counts[:, None] + 2.0 * self.alpha)
        self.log_p_ = np.log(p)
        self.log_q_ = np.log1p(-p)
        self.log_prior_ = np.log(counts / counts.sum())
        return self

    def predict_proba(self, X, cancel: Cancel = None):
        xb = (X > self.binarize).astype(np.float64)
        log_like = xb @ self.log_p_.T + (1.0 - xb) @ self.log_q_.T + self.log_prior_
        log_like -= log_like.max(axis=1, keepdims=True)
        proba = np.exp(log_like)
        proba /= proba.sum(axis=1, keepdims=True)
        return proba


class DecisionTree:
    """CART-style tree: greedy Gini splits, midpoint thresholds, leaf-frequency
    probabilities. Split search runs through the kernel backend and checks
    `cancel` once per feature scan."""

    def __init__(self, max_depth: int = 5, min_samples_split: int = 2):
        self.max_depth = int(max_depth)
        self.min_samples_split = int(min_samples_split)

    def fit(self, X, y, n_classes: int, cancel: Cancel = None):
        _class_matrix(y, n_classes)
        self.n_classes_ = n_classes
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        proba: list[np.ndarray] = []

        def new_node() -> int:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            proba.append(None)  # type: ignore[arg-type]
            return len(feature) - 1

        def grow(Xn: np.ndarray, yn: np.ndarray, depth: int) -> int:
            node = new_node()
            n = yn.shape[0]
            counts = np.bincount(yn, minlength=n_classes).astype(np.int64)
            proba[node] = counts / n
            if (
                depth >= self.max_depth
                or n < self.min_samples_split
                or int(counts.max()) == n
            ):
                return node
            parent_score = float(np.sum(counts * counts)) / n
            best_score = parent_score
            best = None  # (feature, threshold)
            for f in range(Xn.shape[1]):
                _check(cancel)
                col = np.ascontiguousarray(Xn[:, f])
                order = np.argsort(col, kind="stable")
                sv = col[order]
                t, score = kernels.scan_split(
                    sv, np.ascontiguousarray(yn[order]), n_classes
                )
                if t >= 0 and score > best_score:
                    thr = sv[t - 1] + (sv[t] - sv[t - 1]) / 2.0
                    if not (sv[t - 1] <= thr < sv[t]):
                        thr = float(sv[t - 1])
                    best_score = score
                    best = (f, float(thr))
            if best is None:
                return node
            f, thr = best
            mask = Xn[:, f] <= thr
            if not mask.any() or mask.all():  # degenerate split, keep as leaf
                return node
            feature[node] = f
            threshold[node] = thr
            left[node] = grow(Xn[mask], yn[mask], depth + 1)
            right[node] = grow(Xn[~mask], yn[~mask], depth + 1)
            return node

        grow(np.ascontiguousarray(X, dtype=np.float64), np.ascontiguousarray(y, dtype=np.int64), 0)
        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.proba_ = np.vstack(proba)
        return self

    def predict_proba(self, X, cancel: Cancel = None):
        cur = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feats = self.feature_[cur]
            rows = np.flatnonzero(feats >= 0)
            if rows.size == 0:
                break
            vals = X[rows, feats[rows]]
            go_left = vals <= self.threshold_[cur[rows]]
            cur[rows] = np.where(go_left, self.left_[cur[rows]], self.right_[cur[rows]])
        return self.proba_[cur]


class KNN:
    """k-nearest-neighbor voting (Euclidean); `weighting` is `uniform` or
    `distance` (zero-distance neighbors take all the weight). Prediction is
    the hot path and runs blockwise through the kernel backend, checking
    `cancel` between blocks."""

    def __init__(self, k: int = 5, weighting: str = "uniform"):
        if weighting not in ("uniform", "distance"):
            raise ValueError(f"unknown weighting {weighting!r}")
        self.k = int(k)
        self.weighting = weighting

    def fit(self, X, y, n_classes: int, cancel: Cancel = None):
        _class_matrix(y, n_classes)
        self.n_classes_ = n_classes
        self.train_x_ = np.ascontiguousarray(X, dtype=np.float64)
        self.train_y_ = np.ascontiguousarray(y, dtype=np.int64)
        self.train_sq_ = np.einsum("ij,ij->i", self.train_x_, self.train_x_)
        return self

    def predict_proba(self, X, cancel: Cancel = None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        n_train = self.train_x_.shape[0]
        block = max(1, int(2_000_000 // max(1, n_train)))
        out = np.empty((X.shape[0], self.n_classes_))
        for start in range(0, X.shape[0], block):
            _check(cancel)
            stop = min(start + block, X.shape[0])
            out[start:stop] = kernels.knn_block(
                self.train_x_,
                self.train_y_,
                self.train_sq_,
                X[start:stop],
                self.k,
                self.n_classes_,
                self.weighting == "distance",
            )
        return out


class LogisticRegression:
    """Multinomial softmax regression fit by full-batch gradient descent with
    a Lipschitz step size; `iterations` is a fixed budget (a hyperparameter,
    not a convergence test). The intercept column is not regularized and
    `cancel` runs once per iteration."""

    def __init__(self, l2: float = 1.0, iterations: int = 100):
        self.l2 = float(l2)
        self.iterations = int(iterations)

    def fit(self, X, y, n_classes: int, cancel: Cancel = None):
        _class_matrix(y, n_classes)
        self.n_classes_ = n_classes
        n = X.shape[0]
        xb = np.hstack([X, np.ones((n, 1))])
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        gram = xb.T @ xb
        lipschitz = 0.5 * float(np.linalg.eigvalsh(gram)[-1]) / n + self.l2
        step = 1.0 / lipschitz
        w = np.zeros((xb.shape[1], n_classes))
        reg_mask = np.ones((xb.shape[1], 1))
        reg_mask[-1, 0] = 0.0  # leave the intercept unpenalized
        for _ in range(self.iterations):
            _check(cancel)
            z = xb @ w
            z -= z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            grad = xb.T @ (p - onehot) / n + self.l2 * (w * reg_mask)
            w -= step * grad
        self.coef_ = w
        return self

    def predict_proba(self, X, cancel: Cancel = None):
        xb = np.hstack([X, np.ones((X.shape[0], 1))])
        z = xb @ self.coef_
        z -= z.max(axis=1, keepdims=True)
        proba = np.exp(z)
        proba /= proba.sum(axis=1, keepdims=True)
        return proba


# ---------------------------------------------------------------------------
# registry

_P = OperatorKind.PREPROCESSOR
_C = OperatorKind.CLASSIFIER


def _hp(name, domain, default):
    return HyperparamSpec(name, tuple(domain), default)


DEFAULT_REGISTRY = OperatorRegistry(
    [
        OperatorSpec("StandardScaler", _P, (), factory=lambda p: StandardScaler()),
        OperatorSpec("MinMaxScaler", _P, (), factory=lambda p: MinMaxScaler()),
        OperatorSpec(
            "VarianceThreshold",
            _P,
            (_hp("threshold", (0.0, 0.05, 0.1, 0.2), 0.0),),
            factory=lambda p: VarianceThreshold(**p),
        ),
        OperatorSpec(
            "Binarizer",
            _P,
            (_hp("threshold", (0.0, 0.25, 0.5, 0.75, 1.0), 0.5),),
            factory=lambda p: Binarizer(**p),
        ),
        OperatorSpec("GaussianNB", _C, (), factory=lambda p: GaussianNB()),
        OperatorSpec(
            "BernoulliNB",
            _C,
            (
                _hp("alpha", (0.001, 0.01, 0.1, 1.0, 10.0, 100.0), 1.0),
                _hp("binarize", (0.0, 0.25, 0.5, 0.75, 1.0), 0.5),
            ),
            factory=lambda p: BernoulliNB(**p),
        ),
        OperatorSpec(
            "DecisionTree",
            _C,
            (
                _hp("max_depth", tuple(range(1, 11)), 5),
                _hp("min_samples_split", (2, 5, 10, 20), 2),
            ),
            factory=lambda p: DecisionTree(**p),
        ),
        OperatorSpec(
            "KNN",
            _C,
            (
                _hp("k", (1, 3, 5, 7, 11, 15, 21), 5),
                _hp("weighting", ("uniform", "distance"), "uniform"),
            ),
            factory=lambda p: KNN(**p),
        ),
        OperatorSpec(
            "LogisticRegression",
            _C,
            (
                _hp("l2", (1e-4, 1e-2, 1.0, 100.0), 1.0),
                _hp("iterations", (100, 500), 100),
            ),
            factory=lambda p: LogisticRegression(**p),
        ),
    ]
)


def make_estimator(node: PrimitiveNode, registry: OperatorRegistry = DEFAULT_REGISTRY):
    """Instantiate the estimator for a primitive occurrence."""
    spec = registry.get(node.name)
    if spec.factory is None:
        raise ValueError(f"operator {node.name} has no factory")
    return spec.factory(dict(node.hyperparams))
