"""
Train the native classifiers directly, then score configurations with
stratified 5-fold cross-validation.
"""
import numpy as np

from mahpo.data import builtin, summarize
from mahpo.evaluation import evaluate
from mahpo.models import LogisticRegressionParams, fit_logistic, predict
from mahpo.search_space import Configuration, ModelFamily

wine = builtin("wine")
s = summarize(wine)
print(wine.name, s.n_samples, "samples,", s.n_features, "features, class counts", s.class_counts)

# raw wine features span several orders of magnitude; gradient descent
# copes by halving its step whenever the loss would rise
model = fit_logistic(wine.features, wine.labels, LogisticRegressionParams(c=1.0, max_iter=300))
print("step halvings:", model.step_halvings, "final loss:", round(model.loss_history[-1], 4))
print("train accuracy:", np.mean(predict(model, wine.features) == wine.labels))

lr = Configuration(ModelFamily.LOGISTIC_REGRESSION, {"c": 1.0, "max_iter": 300})
rf = Configuration(ModelFamily.RANDOM_FOREST,
                   {"n_estimators": 50, "max_depth": 8, "min_samples_split": 2, "max_features": "sqrt"})
for cfg in (lr, rf):
    report = evaluate(wine, cfg, k=5, seed=0)
    folds = [round(m.accuracy, 3) for m in report.fold_metrics]
    print(cfg.family.value, "mean acc", round(report.mean_accuracy, 4), "folds", folds)

# failures come back as reports, never as exceptions
bad = Configuration(ModelFamily.LOGISTIC_REGRESSION, {"c": -1.0, "max_iter": 300})
print(evaluate(wine, bad).failure_reason)
