import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeroday_ids.classifiers import ModelSpec
from zeroday_ids.oracles import exhaustive_grid_argmax, hand_metrics, naive_confusion, pairwise_auc
from zeroday_ids.tuning_eval import (
    REPORT_COLUMNS,
    ConfusionMatrix,
    EvalError,
    FoldPlan,
    HparamGrid,
    confusion,
    cross_validate,
    evaluate,
    grid_search,
    kfold_indices,
    metrics,
    roc_auc,
    timed_fit_predict,
    trial_rows,
)


def blobs(seed, n=200, shift=1.5):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = rng.standard_normal((n, 3)) + shift * y[:, None]
    return X, y


# ------------------------------------------------------------ confusion / metrics


def test_confusion_simple():
    cm = confusion([1, 0], [1, 0])
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (1, 1, 0, 0)


def test_confusion_flip_symmetry():
    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 2, 100), rng.integers(0, 2, 100)
    a, b = confusion(t, p), confusion(t, 1 - p)
    assert (a.tp, a.fn, a.tn, a.fp) == (b.fn, b.tp, b.fp, b.tn)


def test_confusion_matches_counting_loop():
    rng = np.random.default_rng(1)
    t, p = rng.integers(0, 2, 1000), rng.integers(0, 2, 1000)
    cm = confusion(t, p)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == naive_confusion(t, p)


def test_confusion_errors():
    with pytest.raises(EvalError):
        confusion([1, 0], [1])
    with pytest.raises(EvalError):
        confusion([1, 2], [1, 0])


def test_worked_example():
    m = metrics(ConfusionMatrix(tp=3, fp=1, fn=2, tn=4))
    assert (m.accuracy, m.recall, m.precision, m.fpr) == (0.7, 0.6, 0.75, 0.2)
    assert round(m.f1, 4) == 0.6667
    assert m.flags == ()


def test_perfect_prediction():
    m = evaluate([1, 0, 1, 0], [1, 0, 1, 0], [0.9, 0.1, 0.8, 0.2])
    assert (m.accuracy, m.recall, m.precision, m.f1, m.fpr, m.roc_auc) == (1, 1, 1, 1, 0, 1)


def test_no_positive_predictions_flagged():
    m = metrics(confusion([1, 1, 0], [0, 0, 0]))
    assert m.recall == 0 and m.precision == 0 and m.f1 == 0
    assert "precision" in m.flags and "f1" in m.flags


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metrics_match_hand_formulas(tp, fp, fn, tn):
    if tp + fp + fn + tn == 0:
        return
    m = metrics(ConfusionMatrix(tp, fp, fn, tn))
    for k, v in hand_metrics(tp, fp, fn, tn).items():
        assert abs(getattr(m, k) - v) <= 1e-12


def test_report_row_schema():
    m = metrics(ConfusionMatrix(3, 1, 2, 4))
    assert tuple(m.row("RF", "smote")) == REPORT_COLUMNS
    d = m.to_dict()
    assert d["run_time_s"] == round(m.fit_time_seconds + m.predict_time_seconds, 3)


# ------------------------------------------------------------ AUC


def test_auc_examples():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert roc_auc([0, 1, 1], [0.1, 0.5, 0.9]) == 1.0
    assert roc_auc([0, 1, 0, 1], [0.3] * 4) == 0.5
    with pytest.raises(EvalError):
        roc_auc([1, 1], [0.2, 0.3])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 10)), min_size=2, max_size=80))
def test_auc_matches_pairwise(pairs):
    y = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs], dtype=float)
    if y.min() == y.max():
        return
    assert abs(roc_auc(y, s) - pairwise_auc(y, s)) <= 1e-12
    assert abs(roc_auc(y, -s) - (1 - roc_auc(y, s))) <= 1e-12


# ------------------------------------------------------------ folds


def test_balanced_ten_rows_five_folds():
    y = np.array([0, 1] * 5)
    plan = kfold_indices(y, 5, seed=0)
    for f in range(5):
        te = plan.test_indices(f)
        assert te.size == 2 and y[te].sum() == 1
    assert sorted(np.concatenate([plan.test_indices(f) for f in range(5)]).tolist()) == list(range(10))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 7), st.integers(30, 150))
def test_fold_counts_property(seed, k, n):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[:k] = 0
    y[k:2 * k] = 1
    plan = kfold_indices(y, k, seed)
    n_pos = y.sum()
    sizes = np.bincount(plan.fold, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    for f in range(k):
        assert abs(y[plan.test_indices(f)].sum() - n_pos / k) <= 1


def test_fold_errors():
    with pytest.raises(EvalError):
        kfold_indices(np.array([0] * 10 + [1] * 3), 5)
    with pytest.raises(EvalError):
        kfold_indices(np.array([0, 1]), 1)


# ------------------------------------------------------------ cross-validation


def test_cv_perfect_data():
    y = np.array([0, 1] * 20)
    X = y[:, None] * 10.0
    cv = cross_validate(ModelSpec("DT", {"max_depth": 1}), X, y, kfold_indices(y, 5, 0))
    assert cv.mean["accuracy"] == 1.0


def test_cv_mean_is_fold_mean_and_no_leak():
    X, y = blobs(2)
    plan = kfold_indices(y, 4, 1)
    cv = cross_validate(ModelSpec("LR"), X, y, plan)
    assert abs(cv.mean["accuracy"] - np.mean([f.accuracy for f in cv.folds])) <= 1e-12
    for i, ids in enumerate(cv.fit_fold_ids):
        assert i not in ids and len(ids) == 3


def test_cv_single_class_fold_named():
    y = np.array([0] * 20 + [1] * 2)
    X = np.arange(22.0)[:, None]
    # fold 0 holds both positives, so fitting for fold 0 sees only negatives
    fold = np.ones(22, dtype=int)
    fold[[0, 20, 21]] = 0
    plan = FoldPlan(2, fold, 0)
    with pytest.raises(EvalError, match="fold 0"):
        cross_validate(ModelSpec("DT"), X, y, plan)


# ------------------------------------------------------------ grid search


def test_singleton_grid():
    X, y = blobs(3)
    res = grid_search("DT", HparamGrid("DT", {"max_depth": [3]}), X, y, k=3)
    assert res.best_params == {"max_depth": 3}
    assert len(res.trials) == 1


def test_grid_matches_exhaustive_loop():
    X, y = blobs(4, n=150, shift=0.8)
    grid = HparamGrid("DT", {"max_depth": [1, 3, 8], "criterion": ["entropy", "gini"]})
    res = grid_search("DT", grid, X, y, k=5, seed=7)
    best, scores = exhaustive_grid_argmax("DT", grid.combos(), X, y,
                                          kfold_indices(y, 5, 7).fold, 5, 7)
    assert res.best_params == grid.combos()[best]
    assert [t.mean_score for t in res.trials] == pytest.approx(scores, abs=1e-12)


def test_grid_tie_goes_to_first():
    y = np.array([0, 1] * 20)
    X = y[:, None] * 10.0
    res = grid_search("DT", HparamGrid("DT", {"max_depth": [2, 1, 5]}), X, y, k=4)
    assert res.best_params == {"max_depth": 2}


def test_grid_trial_table_and_errors():
    X, y = blobs(5)
    grid = HparamGrid("DT", {"max_depth": [1, 2], "criterion": ["entropy", "gini"]})
    res = grid_search("DT", grid, X, y, k=3)
    rows = trial_rows(res, "DT", "no_smote")
    assert len(rows) == grid.size * 3
    assert json.loads(rows[0]["params"]) == {"max_depth": 1, "criterion": "entropy"}
    with pytest.raises(EvalError, match="trial 0"):
        grid_search("LR", HparamGrid("LR", {"C": [-1.0]}), X, y, k=3)
    with pytest.raises(EvalError):
        HparamGrid("DT", {"max_depth": []})
    with pytest.raises(EvalError):
        grid_search("DT", grid, X, y, scoring="loss")


# ------------------------------------------------------------ timing


def test_timed_fit_predict():
    X, y = blobs(6)
    model, labels, scores, rep = timed_fit_predict(ModelSpec("GBT", {"n_rounds": 5}), (X, y), (X, y))
    assert rep.fit_time_seconds >= 0 and rep.predict_time_seconds >= 0
    assert rep.total_time_seconds == rep.fit_time_seconds + rep.predict_time_seconds
    assert np.array_equal(labels, model.predict(X))
    assert rep.roc_auc == roc_auc(y, scores)


def test_predict_time_grows_with_rows():
    import time
    X, y = blobs(7, n=2000)
    m = timed_fit_predict(ModelSpec("RF", {"n_estimators": 20}), (X, y), (X, y))[0]
    big = np.vstack([X, X])

    def med(A):
        ts = []
        for _ in range(5):
            t0 = time.perf_counter()
            m.predict(A)
            ts.append(time.perf_counter() - t0)
        return np.median(ts)

    assert med(big) >= med(X)
