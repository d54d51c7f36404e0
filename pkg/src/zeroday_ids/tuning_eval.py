"""Metrics, stratified k-fold cross-validation, grid search and timed evaluation."""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.stats import rankdata

from . import seeding
from .classifiers import FittedModel, ModelError, ModelSpec, fit

REPORT_COLUMNS = (
    "model", "mode", "accuracy", "recall", "precision", "f1", "roc_auc", "fpr",
    "fit_time_s", "predict_time_s",
)
SCORINGS = ("accuracy", "recall", "precision", "f1", "roc_auc")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    accuracy: float
    recall: float
    precision: float
    f1: float
    fpr: float
    roc_auc: float | None = None
    fit_time_seconds: float = 0.0
    predict_time_seconds: float = 0.0
    # names of metrics whose denominator was zero (reported as 0)
    flags: tuple[str, ...] = ()

    @property
    def total_time_seconds(self) -> float:
        return self.fit_time_seconds + self.predict_time_seconds

    def get(self, name: str) -> float:
        return getattr(self, name)

    def row(self, model: str, mode: str) -> dict[str, Any]:
        return {
            "model": model,
            "mode": mode,
            "accuracy": self.accuracy,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "roc_auc": self.roc_auc,
            "fpr": self.fpr,
            "fit_time_s": round(self.fit_time_seconds, 3),
            "predict_time_s": round(self.predict_time_seconds, 3),
        }

    def to_dict(self) -> dict:
        d = {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "roc_auc": self.roc_auc,
            "fpr": self.fpr,
            "fit_time_s": round(self.fit_time_seconds, 3),
            "predict_time_s": round(self.predict_time_seconds, 3),
            "run_time_s": round(self.total_time_seconds, 3),
        }
        if self.flags:
            d["flags"] = list(self.flags)
        return d


def _binary(a, name):
    a = np.asarray(a)
    if a.ndim != 1:
        raise EvalError(f"{name} must be 1-D")
    if not np.isin(a, (0, 1)).all():
        raise EvalError(f"{name} must contain only 0/1")
    return a.astype(np.int8)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    """Counts with attacks (label 1) as the positive class."""
    t = _binary(y_true, "y_true")
    p = _binary(y_pred, "y_pred")
    if t.shape != p.shape:
        raise EvalError(f"length mismatch: {t.size} labels vs {p.size} predictions")
    code = np.bincount(2 * t + p, minlength=4)
    return ConfusionMatrix(tp=int(code[3]), fp=int(code[1]), fn=int(code[2]), tn=int(code[0]))


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.n < 1:
        raise EvalError("empty confusion matrix")
    flags = []

    def ratio(num, den, name):
        if den == 0:
            flags.append(name)
            return 0.0
        return num / den

    accuracy = (cm.tp + cm.tn) / cm.n
    recall = ratio(cm.tp, cm.tp + cm.fn, "recall")
    precision = ratio(cm.tp, cm.tp + cm.fp, "precision")
    fpr = ratio(cm.fp, cm.fp + cm.tn, "fpr")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return MetricsReport(accuracy, recall, precision, f1, fpr, flags=tuple(flags))


def roc_auc(y_true, scores) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    y = _binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise EvalError("scores length differs from y_true")
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise EvalError("ROC AUC needs both classes in y_true")
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def evaluate(y_true, y_pred, scores=None) -> MetricsReport:
    rep = metrics(confusion(y_true, y_pred))
    if scores is not None and np.unique(np.asarray(y_true)).size == 2:
        rep.roc_auc = roc_auc(y_true, scores)
    return rep


# ------------------------------------------------------------ folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    fold: np.ndarray
    seed: int

    def test_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.fold == i)

    def train_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.fold != i)


def kfold_indices(y, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified fold assignment.

    Rows of each class are shuffled and dealt round-robin across folds, with
    the dealing position carried from one class to the next, so both the
    per-fold class counts and the fold sizes differ by at most one.
    """
    y = _binary(y, "y")
    if k < 2:
        raise EvalError("k must be >= 2")
    rng = seeding.stage_rng(seed, seeding.FOLDS)
    fold = np.empty(y.size, dtype=np.int64)
    pos = 0
    for cls in (0, 1):
        rows = np.flatnonzero(y == cls)
        if 0 < rows.size < k:
            raise EvalError(f"class {cls} has {rows.size} rows, fewer than k={k}")
        rows = rng.permutation(rows)
        fold[rows] = (pos + np.arange(rows.size)) % k
        pos += rows.size
    return FoldPlan(k, fold, int(seed))


@dataclass
class CVResult:
    folds: list[MetricsReport]
    mean: dict[str, float]
    # fold ids present in each fold's fitting rows (leakage audit)
    fit_fold_ids: list[tuple[int, ...]] = field(default_factory=list)


_MEAN_KEYS = ("accuracy", "recall", "precision", "f1", "fpr", "roc_auc",
              "fit_time_seconds", "predict_time_seconds")


def cross_validate(spec: ModelSpec, X, y, plan: FoldPlan) -> CVResult:
    X = np.asarray(X, dtype=np.float64)
    y = _binary(y, "y")
    if X.shape[0] != y.size or plan.fold.size != y.size:
        raise EvalError("X, y and fold plan disagree on row count")
    reports, audit = [], []
    for i in range(plan.k):
        tr, te = plan.train_indices(i), plan.test_indices(i)
        if np.unique(y[tr]).size < 2:
            raise EvalError(f"fold {i}: training rows contain a single class")
        fit_ids = tuple(np.unique(plan.fold[tr]).tolist())
        assert i not in fit_ids
        audit.append(fit_ids)
        _, _, _, rep = timed_fit_predict(spec, (X[tr], y[tr]), (X[te], y[te]))
        reports.append(rep)
    mean = {}
    for key in _MEAN_KEYS:
        vals = [getattr(r, key) for r in reports]
        vals = [v for v in vals if v is not None]
        mean[key] = float(np.mean(vals)) if vals else None
    return CVResult(reports, mean, audit)


# ------------------------------------------------------------ grid search


@dataclass
class HparamGrid:
    family: str
    axes: dict[str, list]

    def __post_init__(self):
        if not self.axes:
            raise EvalError("grid has no axes")
        for name, vals in self.axes.items():
            if len(vals) == 0:
                raise EvalError(f"grid axis {name!r} is empty")

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def combos(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, vals)) for vals in itertools.product(*self.axes.values())]


@dataclass
class Trial:
    combo_index: int
    params: dict
    mean_score: float
    std_score: float
    time_seconds: float
    cv: CVResult


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    trials: list[Trial]
    scoring: str


DEFAULT_GRIDS = {
    "DT": {"criterion": ["entropy", "gini"], "max_depth": [5, 10, 20]},
    "LR": {"C": [0.01, 0.1, 1.0], "max_iter": [100, 200]},
    "GBT": {"learning_rate": [0.05, 0.1, 0.3], "max_depth": [3, 7, 10]},
    "RF": {"n_estimators": [100, 200], "max_depth": [5, 10, 20]},
    "MLP": {"hidden_layer_sizes": [(32,), (64,), (32, 16)], "alpha": [1e-4, 1e-3]},
}


def grid_search(
    family: str, grid: HparamGrid, X, y, k: int = 5, seed: int = 0,
    scoring: str = "accuracy", fixed: dict | None = None,
) -> GridSearchResult:
    """Exhaustive grid search scored by mean stratified k-fold CV.

    All combos share one fold plan; combo ``i`` trains with model seed
    ``trial_seed(seed, i)``. The first combo with the highest mean wins.
    """
    if scoring not in SCORINGS:
        raise EvalError(f"scoring must be one of {SCORINGS}")
    if grid.family != family:
        raise EvalError(f"grid is for {grid.family}, not {family}")
    plan = kfold_indices(y, k, seed)
    trials = []
    best_i = None
    for i, combo in enumerate(grid.combos()):
        params = dict(fixed or {})
        params.update(combo)
        try:
            spec = ModelSpec(family, params, seeding.trial_seed(seed, i))
            t0 = time.perf_counter()
            cv = cross_validate(spec, X, y, plan)
            elapsed = time.perf_counter() - t0
        except (ModelError, EvalError) as exc:
            raise EvalError(f"grid trial {i} {combo} failed: {exc}") from exc
        scores = [r.get(scoring) for r in cv.folds]
        trial = Trial(i, combo, float(np.mean(scores)), float(np.std(scores)), elapsed, cv)
        trials.append(trial)
        if best_i is None or trial.mean_score > trials[best_i].mean_score:
            best_i = i
    best = trials[best_i]
    return GridSearchResult(best.params, best.mean_score, trials, scoring)


def trial_rows(result: GridSearchResult, model: str, mode: str) -> list[dict]:
    """One row per (combo, fold) for the trial-table CSV."""
    rows = []
    for t in result.trials:
        for f, rep in enumerate(t.cv.folds):
            row = {"model": model, "mode": mode, "combo_index": t.combo_index,
                   "params": json.dumps(t.params, sort_keys=True, default=list), "fold": f}
            row.update({k: v for k, v in rep.row(model, mode).items() if k not in ("model", "mode")})
            rows.append(row)
    return rows


# ------------------------------------------------------------ timing


def timed_fit_predict(spec: ModelSpec, train, test):
    """Fit on ``train`` = (X, y), predict ``test`` = (X, y), time both.

    Returns (model, labels, scores, report); the report carries the fit and
    predict wall-clock seconds from a monotonic clock.
    """
    Xtr, ytr = train
    Xte, yte = test
    t0 = time.perf_counter()
    model: FittedModel = fit(spec, Xtr, ytr)
    fit_time = time.perf_counter() - t0
    t0 = time.perf_counter()
    labels, scores = model.predict_with_scores(Xte)
    predict_time = time.perf_counter() - t0
    rep = evaluate(yte, labels, scores)
    rep.fit_time_seconds = fit_time
    rep.predict_time_seconds = predict_time
    return model, labels, scores, rep
