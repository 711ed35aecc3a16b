"""Cross-validated evaluation of a configuration, with failures captured in the report."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset, stratified_folds
from .models import (
    LogisticRegressionParams,
    RandomForestParams,
    fit_logistic,
    fit_random_forest,
    predict,
)
from .search_space import Configuration, ModelFamily, default_space, validate


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float

    def to_json(self):
        return {"accuracy": self.accuracy, "precision_macro": self.precision_macro,
                "recall_macro": self.recall_macro, "f1_macro": self.f1_macro}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["accuracy"], obj["precision_macro"], obj["recall_macro"], obj["f1_macro"])


@dataclass(frozen=True)
class EvaluationReport:
    config: Configuration
    fold_metrics: tuple = ()
    mean_accuracy: float = 0.0
    mean_f1_macro: float = 0.0
    wall_time_s: float = 0.0
    status: str = "success"
    failure_reason: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.status == "success"

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "fold_metrics": [m.to_json() for m in self.fold_metrics],
            "mean_accuracy": self.mean_accuracy,
            "mean_f1_macro": self.mean_f1_macro,
            "wall_time_s": self.wall_time_s,
            "status": self.status,
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_json(cls, obj) -> "EvaluationReport":
        return cls(
            config=Configuration.from_json(obj["config"]),
            fold_metrics=tuple(MetricSet.from_json(m) for m in obj["fold_metrics"]),
            mean_accuracy=obj["mean_accuracy"],
            mean_f1_macro=obj["mean_f1_macro"],
            wall_time_s=obj["wall_time_s"],
            status=obj["status"],
            failure_reason=obj["failure_reason"],
        )

    @classmethod
    def failed(cls, config, reason, wall_time_s=0.0) -> "EvaluationReport":
        return cls(config=config, wall_time_s=wall_time_s, status="failed", failure_reason=reason)


def _mean(values) -> float:
    # plain left-to-right sum keeps results identical to a scalar loop
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def compute_metrics(y_true, y_pred, n_classes: int) -> MetricSet:
    """Accuracy and macro precision/recall/F1 over all ``n_classes`` classes.

    0/0 is taken as 0 for every per-class ratio.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be 1-D with equal length")
    if y_true.size == 0:
        raise ValueError("need at least one prediction")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    n = y_true.size
    correct = int(np.trace(cm))
    precisions, recalls, f1s = [], [], []
    for c in range(n_classes):
        tp = int(cm[c, c])
        predicted = int(cm[:, c].sum())
        actual = int(cm[c, :].sum())
        p = tp / predicted if predicted else 0.0
        r = tp / actual if actual else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(2 * p * r / (p + r) if p + r > 0 else 0.0)
    return MetricSet(
        accuracy=correct / n,
        precision_macro=_mean(precisions),
        recall_macro=_mean(recalls),
        f1_macro=_mean(f1s),
    )


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        return cls(mean=mean, scale=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros_like(X, dtype=float)
        nz = self.scale > 0
        # zero-variance features carry no information and map to 0
        out[:, nz] = (X[:, nz] - self.mean[nz]) / self.scale[nz]
        return out


def _fit(config: Configuration, X, y, n_classes: int, seed: int):
    v = config.values
    if config.family is ModelFamily.LOGISTIC_REGRESSION:
        params = LogisticRegressionParams(c=float(v["c"]), max_iter=int(v["max_iter"]))
        return fit_logistic(X, y, params, seed=seed, n_classes=n_classes)
    params = RandomForestParams(
        n_estimators=int(v["n_estimators"]),
        max_depth=int(v["max_depth"]),
        min_samples_split=int(v["min_samples_split"]),
        max_features=v["max_features"],
    )
    return fit_random_forest(X, y, params, seed=seed, n_classes=n_classes)


def fold_data(dataset: Dataset, config: Configuration, train, test):
    """Train/test matrices for one fold plus the scaler fitted on the training rows.

    Only linear models are standardized; for forests the scaler is None.
    """
    X_train, X_test = dataset.features[train], dataset.features[test]
    scaler = None
    if config.family is ModelFamily.LOGISTIC_REGRESSION:
        scaler = Standardizer.fit(X_train)
        X_train, X_test = scaler.transform(X_train), scaler.transform(X_test)
    return X_train, X_test, scaler


def evaluate(dataset: Dataset, config: Configuration, k: int = 5, seed: int = 0) -> EvaluationReport:
    """Stratified k-fold CV of ``config``; never raises, failures land in ``status``."""
    start = time.perf_counter()
    problems = validate(default_space(config.family), config)
    if problems:
        return EvaluationReport.failed(config, "invalid configuration: " + "; ".join(problems))
    try:
        folds = stratified_folds(dataset, k, seed)
    except Exception as exc:
        return EvaluationReport.failed(config, f"fold assignment: {exc}", time.perf_counter() - start)
    metrics = []
    for fold in range(k):
        try:
            train, test = folds.train_test(fold)
            X_train, X_test, _ = fold_data(dataset, config, train, test)
            model = _fit(config, X_train, dataset.labels[train], dataset.n_classes, seed)
            y_pred = predict(model, X_test)
            metrics.append(compute_metrics(dataset.labels[test], y_pred, dataset.n_classes))
        except Exception as exc:
            return EvaluationReport.failed(
                config, f"fold {fold}: {type(exc).__name__}: {exc}", time.perf_counter() - start)
    return EvaluationReport(
        config=config,
        fold_metrics=tuple(metrics),
        mean_accuracy=_mean([m.accuracy for m in metrics]),
        mean_f1_macro=_mean([m.f1_macro for m in metrics]),
        wall_time_s=time.perf_counter() - start,
    )
