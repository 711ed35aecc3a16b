import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mahpo.models import (
    Forest,
    LogisticRegressionParams,
    RandomForestParams,
    Tree,
    TrainingError,
    fit_logistic,
    fit_random_forest,
    gini,
    logistic_objective,
    predict,
    predict_proba,
)


def test_gini_values():
    assert gini([4, 4]) == pytest.approx(0.5)
    assert gini([8, 0]) == 0.0
    assert gini([3, 1]) == pytest.approx(0.375)
    with pytest.raises(ValueError):
        gini([0, 0])


def _blobs(seed=0, n=30):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-3, 0.4, (n, 2)), rng.normal(3, 0.4, (n, 2))])
    return X, np.repeat([0, 1], n)


def test_separable_problem_is_fit_exactly():
    X, y = _blobs()
    lr = fit_logistic(X, y, LogisticRegressionParams(c=10.0, max_iter=500))
    rf = fit_random_forest(X, y, RandomForestParams(20, 5, 2, "sqrt"))
    assert (predict(lr, X) == y).all()
    assert (predict(rf, X) == y).all()


def test_xor_depth_one_stump_cannot_beat_75_percent():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    # every axis-aligned stump with majority leaves: best possible accuracy
    best = 0.0
    for f, thr in itertools.product(range(2), [-0.5, 0.5, 1.5]):
        left = X[:, f] <= thr
        pred = np.empty(4, dtype=int)
        for side in (left, ~left):
            if side.any():
                pred[side] = np.bincount(y[side], minlength=2).argmax()
        best = max(best, float((pred == y).mean()))
    assert best == 0.5
    forest = fit_random_forest(X, y, RandomForestParams(1, 1, 2, "all"))
    assert (predict(forest, X) == y).mean() <= 0.75


def test_training_is_deterministic_per_seed():
    X, y = _blobs(1)
    params = RandomForestParams(8, 6, 2, "sqrt")
    assert fit_random_forest(X, y, params, seed=5) == fit_random_forest(X, y, params, seed=5)
    lp = LogisticRegressionParams(c=1.0, max_iter=100)
    assert np.array_equal(fit_logistic(X, y, lp).W, fit_logistic(X, y, lp).W)


def test_single_class_training_fails():
    X = np.zeros((5, 2))
    with pytest.raises(TrainingError):
        fit_logistic(X, np.zeros(5, dtype=int), LogisticRegressionParams(1.0, 100))
    with pytest.raises(TrainingError):
        fit_random_forest(X, np.zeros(5, dtype=int), RandomForestParams(2, 2, 2))


def test_predict_dimension_mismatch():
    X, y = _blobs()
    model = fit_logistic(X, y, LogisticRegressionParams(1.0, 50))
    with pytest.raises(ValueError, match="features"):
        predict(model, np.zeros((3, 5)))


def numeric_gradient(W, X, Y, c, h=1e-6):
    g = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        g[idx] = (logistic_objective(Wp, X, Y, c)[0] - logistic_objective(Wm, X, Y, c)[0]) / (2 * h)
    return g


def gradient_relative_error(seed: int) -> float:
    rng = np.random.default_rng(seed)
    n, d, C = int(rng.integers(5, 20)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
    X = rng.normal(size=(n, d))
    Y = np.eye(C)[rng.integers(0, C, n)]
    W = rng.normal(size=(C, d + 1))
    c = float(10 ** rng.uniform(-2, 2))
    analytic = logistic_objective(W, X, Y, c)[1]
    numeric = numeric_gradient(W, X, Y, c)
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12))


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    assert gradient_relative_error(seed) < 1e-5


@pytest.mark.parametrize("seed", range(5))
def test_gradient_descent_loss_never_increases(seed, wine):
    rng = np.random.default_rng(seed)
    X = wine.features[:, rng.choice(wine.n_features, 4, replace=False)]
    model = fit_logistic(X, wine.labels, LogisticRegressionParams(c=float(10 ** rng.uniform(-3, 3)), max_iter=200))
    losses = np.array(model.loss_history)
    assert (np.diff(losses) <= 0).all()


def test_unscaled_features_trigger_step_halving(wine):
    model = fit_logistic(wine.features, wine.labels, LogisticRegressionParams(c=1.0, max_iter=50))
    assert model.step_halvings > 0
    assert (np.diff(model.loss_history) <= 0).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["sqrt", "log2", "all"]))
def test_probabilities_sum_to_one(seed, max_features):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = rng.integers(0, 3, 40)
    y[:3] = [0, 1, 2]
    Xq = rng.normal(size=(15, 4)) * 5
    for model in (fit_logistic(X, y, LogisticRegressionParams(1.0, 50)),
                  fit_random_forest(X, y, RandomForestParams(5, 4, 2, max_features), seed=seed)):
        p = predict_proba(model, Xq)
        assert np.abs(p.sum(axis=1) - 1).max() <= 1e-9
        assert (p >= 0).all()


def test_forest_probability_is_mean_of_trees(iris):
    forest = fit_random_forest(iris.features, iris.labels, RandomForestParams(7, 3, 2, "sqrt"), seed=2)
    expected = np.mean([t.predict_proba(iris.features) for t in forest.trees], axis=0)
    assert np.allclose(forest.predict_proba(iris.features), expected, atol=0, rtol=0)


def _leaf(dist):
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([dist], dtype=float))


def test_vote_tie_goes_to_lowest_class():
    forest = Forest((_leaf([0.0, 1.0]), _leaf([1.0, 0.0])), n_features=1, n_classes=2)
    assert predict(forest, np.zeros((1, 1))).tolist() == [0]


def test_depth_limit_is_respected(breast_cancer):
    forest = fit_random_forest(breast_cancer.features, breast_cancer.labels, RandomForestParams(3, 2, 2, "all"))
    for tree in forest.trees:
        # depth <= 2 means at most 7 nodes
        assert tree.n_nodes <= 7


def test_corner_points_labeled_by_first_coordinate():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    y = (X[:, 0] > 0).astype(int)
    model = fit_logistic(X, y, LogisticRegressionParams(c=1.0, max_iter=500))
    assert (predict(model, X) == y).all()


def test_pure_node_becomes_single_leaf():
    from mahpo.models import build_tree
    X = np.arange(6.0)[:, None]
    tree = build_tree(X, np.ones(6, dtype=int), 2, RandomForestParams(1, 5, 2, "all"), np.random.default_rng(0))
    assert tree.n_nodes == 1 and tree.value[0].tolist() == [0.0, 1.0]


def test_zero_weights_give_uniform_probabilities():
    from mahpo.models import SoftmaxModel
    model = SoftmaxModel(np.zeros((4, 3)))
    assert np.allclose(model.predict_proba(np.ones((2, 2))), 0.25)


def test_two_tree_tie_probabilities():
    forest = Forest((_leaf([1.0, 0.0]), _leaf([0.0, 1.0])), n_features=1, n_classes=2)
    assert predict_proba(forest, np.zeros((1, 1))).tolist() == [[0.5, 0.5]]
