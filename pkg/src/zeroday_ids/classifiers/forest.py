from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import seeding
from .base import FittedModel, ModelError, check_xy
from .tree import TreeArrays, grow_classification_tree


@dataclass
class ForestModel(FittedModel):
    trees: list[TreeArrays] = field(default_factory=list)
    criterion: str = "entropy"

    def __post_init__(self):
        self.family = "RF"

    def _leaf_scores(self, X) -> np.ndarray:
        X = self._check(X)
        return np.stack([t.predict_value(X) for t in self.trees])

    def predict_score(self, X) -> np.ndarray:
        """Mean leaf score over trees (used for ROC AUC)."""
        return self._leaf_scores(X).mean(axis=0)

    def vote_fraction(self, X) -> np.ndarray:
        return (self._leaf_scores(X) >= 0.5).mean(axis=0)

    def predict(self, X) -> np.ndarray:
        return (self.vote_fraction(X) >= 0.5).astype(np.int8)

    def predict_with_scores(self, X) -> tuple[np.ndarray, np.ndarray]:
        leaf = self._leaf_scores(X)
        votes = (leaf >= 0.5).mean(axis=0)
        return (votes >= 0.5).astype(np.int8), leaf.mean(axis=0)

    def _params(self) -> dict:
        return {"criterion": self.criterion, "trees": [t.to_nodes() for t in self.trees]}


def fit_forest(
    X, y, n_estimators=100, criterion="entropy", max_depth=None,
    seed=0, min_samples_leaf=1, max_features="sqrt",
) -> ForestModel:
    """Bagged trees with sqrt(d) random candidate features per split.

    Tree ``t`` draws its bootstrap sample and feature subsets from a seed
    derived from (seed, t), so the forest does not depend on build order.
    """
    X, y = check_xy(X, y)
    if n_estimators < 1:
        raise ModelError("n_estimators must be >= 1")
    n, d = X.shape
    if max_features == "sqrt":
        m = max(1, int(math.sqrt(d)))
    elif max_features is None:
        m = d
    else:
        m = int(max_features)
    presorted = [np.argsort(X[:, f], kind="stable") for f in range(d)]
    trees = []
    for t in range(n_estimators):
        rng = np.random.default_rng(seeding.trial_seed(seed, t))
        rows = rng.integers(0, n, size=n)
        trees.append(
            grow_classification_tree(
                X, y, criterion, max_depth, min_samples_leaf, m, rng, rows, presorted
            )
        )
    model = ForestModel(trees=trees, criterion=criterion)
    model.n_features_expected = d
    return model
