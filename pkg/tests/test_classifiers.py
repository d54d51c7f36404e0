import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeroday_ids.classifiers import (
    DEFAULT_HYPERPARAMETERS,
    FAMILIES,
    ForestModel,
    LogisticModel,
    ModelError,
    ModelSpec,
    TreeArrays,
    entropy_impurity,
    fit,
    fit_forest,
    fit_gbt,
    fit_logistic,
    fit_mlp,
    fit_tree,
    gini_impurity,
    logistic_objective,
    mlp_objective,
    model_from_json,
    model_to_json,
)
from zeroday_ids.classifiers.base import log_loss_from_logits
from zeroday_ids.classifiers.tree import best_impurity_split
from zeroday_ids.oracles import central_difference, exhaustive_split, relative_error


def two_gaussians(seed, n=400, d=4, shift=1.2):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = rng.standard_normal((n, d)) + shift * y[:, None] * rng.standard_normal(d)
    return X, y


# ------------------------------------------------------------ impurity


def test_entropy_values():
    assert entropy_impurity((5, 5)) == 1.0
    assert entropy_impurity((10, 0)) == 0.0
    p = 0.25
    assert entropy_impurity((2, 6)) == pytest.approx(-(p * math.log2(p) + (1 - p) * math.log2(1 - p)))
    assert round(entropy_impurity((2, 6)), 4) == 0.8113
    with pytest.raises(ValueError):
        entropy_impurity((0, 0))


def test_gini_values():
    assert gini_impurity((5, 5)) == 0.5
    assert gini_impurity((3, 0)) == 0.0


# ------------------------------------------------------------ logistic


def test_logistic_separable_boundary():
    X = np.r_[-np.ones(20), np.ones(20)][:, None]
    y = np.r_[np.zeros(20), np.ones(20)]
    m = fit_logistic(X, y, C=1e4, max_iter=500)
    boundary = -m.intercept / m.weights[0]
    assert abs(boundary) < 0.1
    assert np.array_equal(m.predict(X), y)


def test_logistic_strong_penalty_gives_prior():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 3))
    y = (rng.random(200) < 0.3).astype(int)
    m = fit_logistic(X, y, C=1e-8, max_iter=300)
    assert np.abs(m.weights).max() < 1e-5
    assert np.allclose(m.predict_score(X), y.mean(), atol=1e-4)


def test_logistic_gradient_finite_difference():
    rng = np.random.default_rng(1)
    X, y = rng.standard_normal((10, 3)), rng.integers(0, 2, 10).astype(float)
    w, b = rng.standard_normal(3), -0.2
    _, gw, gb = logistic_objective(w, b, X, y, 0.5)
    num = central_difference(lambda v: logistic_objective(v[:3], v[3], X, y, 0.5)[0], np.r_[w, b], 1e-6)
    assert relative_error(np.r_[gw, gb], num) < 1e-6


def test_logistic_loss_decreases():
    X, y = two_gaussians(2)
    m = fit_logistic(X, y, C=1.0, max_iter=50)
    assert all(b <= a + 1e-12 for a, b in zip(m.loss_history, m.loss_history[1:]))


def test_lr_score_by_hand():
    m = LogisticModel(weights=np.array([0.5, -1.0]), intercept=0.25)
    m.n_features_expected = 2
    X = np.array([[1.0, 2.0], [-2.0, 0.5]])
    z = [0.5 - 2.0 + 0.25, -1.0 - 0.5 + 0.25]
    assert m.predict_score(X) == pytest.approx([1 / (1 + math.exp(-v)) for v in z], abs=1e-15)


def test_score_half_labels_one():
    m = LogisticModel(weights=np.zeros(1), intercept=0.0)
    m.n_features_expected = 1
    assert m.predict_score([[3.0]])[0] == 0.5
    assert m.predict([[3.0]])[0] == 1


# ------------------------------------------------------------ trees


def test_tree_single_perfect_split():
    X = np.array([[0.0], [1.0], [2.0], [5.0], [6.0]])
    y = np.array([0, 0, 0, 1, 1])
    m = fit_tree(X, y, max_depth=1)
    assert m.tree.threshold[0] == 3.5
    assert np.array_equal(m.predict(X), y)


def test_root_split_matches_exhaustive_oracle():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = np.round(rng.standard_normal((100, 4)), 1)
        y = rng.integers(0, 2, 100)
        for crit in ("entropy", "gini"):
            f, thr, gain = best_impurity_split(X, y, np.arange(100), range(4), crit, 1)
            of, othr, ogain = exhaustive_split(X, y, crit)
            assert (f, thr) == (of, othr)
            assert gain == pytest.approx(ogain, abs=1e-12)


def test_tree_respects_depth_and_leaf_size():
    X, y = two_gaussians(3)
    m = fit_tree(X, y, max_depth=3, min_samples_leaf=10)
    assert m.tree.depth <= 3
    leaves = m.tree.apply(X)
    assert np.bincount(leaves)[np.unique(leaves)].min() >= 10


def test_tree_leaf_score_is_positive_fraction():
    X, y = two_gaussians(4)
    m = fit_tree(X, y, max_depth=2)
    leaves = m.tree.apply(X)
    for leaf in np.unique(leaves):
        assert m.tree.value[leaf] == pytest.approx(y[leaves == leaf].mean())


def test_tree_empty_data():
    with pytest.raises(ModelError):
        fit_tree(np.zeros((0, 2)), np.zeros(0))


# ------------------------------------------------------------ forest


def test_one_row_forest_equals_tree():
    X, y = np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0, 1])
    forest = fit_forest(X[:1], y[:1], n_estimators=1, seed=0)
    tree = fit_tree(X[:1], y[:1])
    assert np.array_equal(forest.predict_score(X), tree.predict_score(X))


def stub_forest(n_pos, n_total):
    def leaf(v):
        return TreeArrays(np.array([-1]), np.array([np.nan]), np.array([-1]), np.array([-1]),
                          np.array([v]))
    trees = [leaf(0.6)] * n_pos + [leaf(0.0)] * (n_total - n_pos)
    m = ForestModel(trees=trees)
    m.n_features_expected = 1
    return m


def test_forest_vote_rule():
    assert stub_forest(101, 200).predict([[0.0]])[0] == 1
    assert stub_forest(100, 200).predict([[0.0]])[0] == 1  # tie goes to attack
    assert stub_forest(99, 200).predict([[0.0]])[0] == 0
    # the mean leaf score (0.3) would say 0; labels follow votes
    assert stub_forest(101, 200).predict_score([[0.0]])[0] < 0.5


def test_forest_beats_tree_mostly():
    wins = 0
    for seed in range(10):
        X, y = two_gaussians(seed, n=600, d=6, shift=1.0)
        Xt, yt = X[:400], y[:400]
        Xv, yv = X[400:], y[400:]
        tree_acc = (fit_tree(Xt, yt).predict(Xv) == yv).mean()
        forest_acc = (fit_forest(Xt, yt, n_estimators=40, seed=seed).predict(Xv) == yv).mean()
        wins += forest_acc >= tree_acc
    assert wins >= 8


def test_forest_seeded():
    X, y = two_gaussians(5)
    a = fit_forest(X, y, n_estimators=5, seed=1, max_depth=4).predict_score(X)
    b = fit_forest(X, y, n_estimators=5, seed=1, max_depth=4).predict_score(X)
    c = fit_forest(X, y, n_estimators=5, seed=2, max_depth=4).predict_score(X)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


# ------------------------------------------------------------ boosting


def test_gbt_zero_rounds_is_prior():
    X, y = two_gaussians(6)
    m = fit_gbt(X, y, n_rounds=0)
    assert np.allclose(m.predict_score(X), y.mean(), atol=1e-12)


def test_gbt_loss_non_increasing():
    X, y = two_gaussians(7, n=500)
    m = fit_gbt(X, y, n_rounds=100, max_depth=3)
    assert len(m.train_loss) == 101
    assert all(b <= a + 1e-12 for a, b in zip(m.train_loss, m.train_loss[1:]))
    z = m.decision_function(X)
    assert log_loss_from_logits(y, z) == pytest.approx(m.train_loss[-1], abs=1e-12)


def test_gbt_single_stump_matches_newton_formula():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    m = fit_gbt(X, y, n_rounds=1, max_depth=1, learning_rate=1.0, lambda_reg=1.0,
                min_child_weight=0.0)
    t = m.trees[0]
    assert t.threshold[0] == 1.5
    # prior 0.5: g = 0.5 - y, h = 0.25 per row; left leaf -G/(H+1) = -1/(0.5+1)
    assert t.value[t.left[0]] == pytest.approx(-1.0 / 1.5)
    assert t.value[t.right[0]] == pytest.approx(1.0 / 1.5)


def test_gbt_pure_labels_rejected():
    with pytest.raises(ModelError):
        fit_gbt(np.zeros((4, 1)), np.ones(4))


# ------------------------------------------------------------ MLP


def test_mlp_zero_init_zero_epochs():
    X, y = two_gaussians(8)
    m = fit_mlp(X, y, epochs=0, zero_init=True)
    assert np.all(m.predict_score(X) == 0.5)


def test_mlp_gradient_finite_difference():
    rng = np.random.default_rng(9)
    X, y = rng.standard_normal((10, 2)), rng.integers(0, 2, 10).astype(float)
    Ws = [rng.standard_normal((2, 3)), rng.standard_normal((3, 1))]
    bs = [rng.standard_normal(3), rng.standard_normal(1)]
    _, gWs, gbs = mlp_objective(Ws, bs, X, y, 1e-3)
    shapes = [a.shape for a in Ws + bs]
    flat = np.concatenate([a.ravel() for a in Ws + bs])

    def f(v):
        parts, i = [], 0
        for s in shapes:
            k = int(np.prod(s))
            parts.append(v[i:i + k].reshape(s))
            i += k
        return mlp_objective(parts[:2], parts[2:], X, y, 1e-3)[0]

    num = central_difference(f, flat, 1e-5)
    assert relative_error(np.concatenate([a.ravel() for a in gWs + gbs]), num) < 1e-4


def test_mlp_learns():
    X, y = two_gaussians(10, n=800, shift=2.0)
    m = fit_mlp(X, y, epochs=30, batch_size=32, learning_rate=0.05, seed=1)
    assert (m.predict(X) == y).mean() > 0.8
    assert m.epoch_loss[-1] < m.epoch_loss[0]


# ------------------------------------------------------------ common surface


@pytest.mark.parametrize("family", FAMILIES)
def test_family_contract(family):
    X, y = two_gaussians(11, n=300)
    small = {"RF": {"n_estimators": 10}, "GBT": {"n_rounds": 10}, "MLP": {"epochs": 5}}
    m = fit(ModelSpec(family, small.get(family, {}), seed=3), X, y)
    s = m.predict_score(X)
    assert np.all((s >= 0) & (s <= 1))
    assert m.fit_time_seconds >= 0
    if family != "RF":
        assert np.array_equal(m.predict(X), (s >= 0.5).astype(int))
    back = model_from_json(model_to_json(m))
    assert np.allclose(back.predict_score(X), s, atol=1e-12)
    with pytest.raises(ModelError, match="expects 4 features"):
        m.predict(X[:, :3])


def test_spec_validation():
    with pytest.raises(ModelError, match="unknown model family"):
        ModelSpec("SVM")
    with pytest.raises(ModelError, match="invalid hyperparameters"):
        ModelSpec("DT", {"n_estimators": 3})
    with pytest.raises(ModelError):
        ModelSpec("LR", {"C": -1})
    assert ModelSpec("RF").resolved() == DEFAULT_HYPERPARAMETERS["RF"]


def test_best_reported_settings_are_defaults():
    assert DEFAULT_HYPERPARAMETERS["DT"]["criterion"] == "entropy"
    assert DEFAULT_HYPERPARAMETERS["DT"]["max_depth"] == 10
    assert DEFAULT_HYPERPARAMETERS["RF"]["n_estimators"] == 200
    assert DEFAULT_HYPERPARAMETERS["GBT"]["learning_rate"] == 0.1
    assert DEFAULT_HYPERPARAMETERS["GBT"]["max_depth"] == 7
    assert tuple(DEFAULT_HYPERPARAMETERS["MLP"]["hidden_layer_sizes"]) == (32,)
    assert DEFAULT_HYPERPARAMETERS["MLP"]["alpha"] == 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_scores_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((60, 3)) * 10
    y = rng.integers(0, 2, 60)
    y[:2] = [0, 1]
    for fam, hp in (("LR", {}), ("DT", {"max_depth": 4}), ("GBT", {"n_rounds": 5})):
        s = fit(ModelSpec(fam, hp), X, y).predict_score(rng.standard_normal((20, 3)) * 100)
        assert np.all((s >= 0) & (s <= 1))
