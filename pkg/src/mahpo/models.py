"""Native classifiers: L2 multinomial logistic regression and a Gini random forest."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class LogisticRegressionParams:
    c: float
    max_iter: int
    tol: float = 1e-6
    learning_rate: float = 0.1

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("c must be a positive finite number")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0 or not self.learning_rate > 0:
            raise ValueError("tol and learning_rate must be positive")


@dataclass(frozen=True)
class RandomForestParams:
    n_estimators: int
    max_depth: int
    min_samples_split: int
    max_features: str = "sqrt"

    def __post_init__(self):
        if self.n_estimators < 1 or self.max_depth < 1:
            raise ValueError("n_estimators and max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_features not in ("sqrt", "log2", "all"):
            raise ValueError(f"unknown max_features {self.max_features!r}")


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise TrainingError("X must be n x d with one label per row")
    if X.shape[0] < 2:
        raise TrainingError("need at least 2 samples")
    if not np.isfinite(X).all():
        raise TrainingError("X contains non-finite values")
    if y.min() < 0:
        raise TrainingError("labels must be non-negative class ids")
    if np.unique(y).size < 2:
        raise TrainingError("single-class y: at least 2 classes required")
    return X, y


# -- logistic regression -----------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_objective(W: np.ndarray, X: np.ndarray, Y: np.ndarray, c: float):
    """Mean cross-entropy + ||W_nobias||^2 / (2 c n) and its gradient.

    ``W`` is C x (d+1) with the bias in the last column; ``Y`` is one-hot n x C.
    """
    n, d = X.shape
    logits = X @ W[:, :d].T + W[:, d]
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_p = z - log_norm[:, None]
    reg = 1.0 / (c * n)
    wd = W[:, :d]
    loss = -(Y * log_p).sum() / n + 0.5 * reg * (wd * wd).sum()
    resid = (np.exp(log_p) - Y) / n
    grad = np.empty_like(W)
    grad[:, :d] = resid.T @ X + reg * wd
    grad[:, d] = resid.sum(axis=0)
    return float(loss), grad


@dataclass(frozen=True, eq=False)
class SoftmaxModel:
    W: np.ndarray
    loss_history: tuple = ()
    step_halvings: int = 0
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return self.W.shape[1] - 1

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def predict_proba(self, X) -> np.ndarray:
        X = _check_predict(X, self.n_features)
        d = self.n_features
        return softmax(X @ self.W[:, :d].T + self.W[:, d])


def fit_logistic(X, y, params: LogisticRegressionParams, seed: int = 0, n_classes: int = None) -> SoftmaxModel:
    """Full-batch gradient descent from zero weights.

    The step starts at ``params.learning_rate`` and is halved whenever a step
    would raise the loss, so the recorded loss sequence never increases.
    ``seed`` is accepted for interface symmetry with the forest and unused.
    """
    X, y = _check_xy(X, y)
    n, d = X.shape
    C = int(max(y.max() + 1, n_classes or 0))
    Y = np.zeros((n, C))
    Y[np.arange(n), y] = 1.0
    W = np.zeros((C, d + 1))
    loss, grad = logistic_objective(W, X, Y, params.c)
    losses = [loss]
    lr = params.learning_rate
    halvings = 0
    it = 0
    while it < params.max_iter and np.abs(grad).max() >= params.tol:
        while True:
            W_new = W - lr * grad
            loss_new, grad_new = logistic_objective(W_new, X, Y, params.c)
            if loss_new <= loss:
                break
            lr *= 0.5
            halvings += 1
            if lr < 1e-12:
                break
        if loss_new > loss:
            break
        W, loss, grad = W_new, loss_new, grad_new
        losses.append(loss)
        it += 1
    W.setflags(write=False)
    return SoftmaxModel(W=W, loss_history=tuple(losses), step_halvings=halvings, n_iter=it)


# -- trees -------------------------------------------------------------------

def gini(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini needs at least one positive count")
    p = counts / total
    return float(1.0 - (p * p).sum())


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # per-node class distribution, rows sum to 1

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("feature", "threshold", "left", "right", "value"))


def _n_subset(max_features: str, d: int) -> int:
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if max_features == "log2":
        return max(1, int(math.log2(d)))
    return d


def _best_split(Xn: np.ndarray, yn: np.ndarray, features: np.ndarray, n_classes: int):
    """Lowest weighted child Gini over ``features`` (sorted ascending).

    Returns (feature, threshold) or None when no feature has two distinct values.
    Ties go to the first feature, then the lowest threshold.
    """
    n = yn.shape[0]
    cols = Xn[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    sorted_x = np.take_along_axis(cols, order, axis=0)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), yn] = 1.0
    left = np.cumsum(onehot[order], axis=0)[:-1]         # (n-1, m, C)
    total = left[-1] + onehot[order[-1]]                  # (m, C)
    right = total[None] - left
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    # weighted Gini times n: n_L - sum(L^2)/n_L + n_R - sum(R^2)/n_R
    score = (n_left - (left * left).sum(axis=2) / n_left) + (n_right - (right * right).sum(axis=2) / n_right)
    valid = sorted_x[1:] > sorted_x[:-1]
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    # feature-major flat argmin gives lowest feature, then lowest threshold position
    flat = score.T.ravel()
    best = int(np.argmin(flat))
    j, pos = divmod(best, n - 1)
    thr = 0.5 * (sorted_x[pos, j] + sorted_x[pos + 1, j])
    if not thr < sorted_x[pos + 1, j]:
        thr = sorted_x[pos, j]
    return int(features[j]), float(thr)


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int, params: RandomForestParams,
               rng: np.random.Generator) -> Tree:
    d = X.shape[1]
    m = _n_subset(params.max_features, d)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1, counts

    root, counts = new_node(np.arange(y.shape[0]))
    stack = [(root, np.arange(y.shape[0]), 0, counts)]
    while stack:
        node, idx, depth, counts = stack.pop()
        if depth >= params.max_depth or idx.size < params.min_samples_split or (counts > 0).sum() <= 1:
            continue
        features = np.sort(rng.choice(d, size=m, replace=False)) if m < d else np.arange(d)
        split = _best_split(X[idx], y[idx], features, n_classes)
        if split is None:
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        lnode, lcounts = new_node(li)
        rnode, rcounts = new_node(ri)
        feature[node], threshold[node], left[node], right[node] = f, thr, lnode, rnode
        # right pushed first so the left subtree is expanded first (stable node numbering)
        stack.append((rnode, ri, depth + 1, rcounts))
        stack.append((lnode, li, depth + 1, lcounts))
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple
    n_features: int
    n_classes: int

    def predict_proba(self, X) -> np.ndarray:
        X = _check_predict(X, self.n_features)
        per_tree = np.stack([t.predict_proba(X) for t in self.trees])
        return per_tree.mean(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Forest):
            return NotImplemented
        return (self.n_features == other.n_features and self.n_classes == other.n_classes
                and len(self.trees) == len(other.trees)
                and all(a == b for a, b in zip(self.trees, other.trees)))


def tree_seed(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, tree_index])


def fit_random_forest(X, y, params: RandomForestParams, seed: int = 0, n_classes: int = None) -> Forest:
    """Bagged CART trees; tree ``i`` draws from ``default_rng([seed, i])``."""
    X, y = _check_xy(X, y)
    n = X.shape[0]
    C = int(max(y.max() + 1, n_classes or 0))
    trees = []
    for i in range(params.n_estimators):
        rng = tree_seed(seed, i)
        boot = rng.integers(0, n, size=n)
        trees.append(build_tree(X[boot], y[boot], C, params, rng))
    return Forest(trees=tuple(trees), n_features=X.shape[1], n_classes=C)


# -- shared prediction -------------------------------------------------------

TrainedModel = Union[SoftmaxModel, Forest]


def _check_predict(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected {d} features, got shape {X.shape}")
    return X


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    return model.predict_proba(X)


def predict(model: TrainedModel, X) -> np.ndarray:
    # argmax returns the first maximum, i.e. the lowest class id on ties
    return np.argmax(model.predict_proba(X), axis=1)
