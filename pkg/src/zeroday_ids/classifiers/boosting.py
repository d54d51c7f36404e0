from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .base import FittedModel, ModelError, check_xy, log_loss_from_logits, require_both_classes, sigmoid
from .tree import FeatureBins, TreeArrays, grow_newton_tree


@dataclass
class BoostedModel(FittedModel):
    base_logit: float = 0.0
    learning_rate: float = 0.1
    trees: list[TreeArrays] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.family = "GBT"

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        z = np.full(X.shape[0], self.base_logit)
        for t in self.trees:
            z += self.learning_rate * t.predict_value(X)
        return z

    def predict_score(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def _params(self) -> dict:
        return {
            "base_logit": self.base_logit,
            "learning_rate": self.learning_rate,
            "trees": [t.to_nodes() for t in self.trees],
        }


def fit_gbt(
    X, y, learning_rate=0.1, max_depth=7, n_rounds=100, lambda_reg=1.0,
    min_child_weight=1.0, max_bins=256,
) -> BoostedModel:
    """Newton boosting of regression trees on the logistic loss.

    Each round fits a tree to gradients ``p - y`` and hessians ``p(1 - p)``;
    leaves hold ``-G/(H + lambda_reg)`` and are added with ``learning_rate``.
    The starting logit is the training prior's log-odds. ``train_loss``
    records the training log-loss before the first round and after each one.
    """
    X, y = check_xy(X, y)
    require_both_classes(y)
    if not 0 < learning_rate <= 1:
        raise ModelError("learning_rate must lie in (0, 1]")
    if max_depth < 1 or n_rounds < 0:
        raise ModelError("max_depth must be >= 1 and n_rounds >= 0")
    prior = y.mean()
    base = math.log(prior / (1 - prior))
    z = np.full(X.shape[0], base)
    losses = [log_loss_from_logits(y, z)]
    trees = []
    bins = FeatureBins.build(X, max_bins) if n_rounds else None
    for _ in range(n_rounds):
        p = sigmoid(z)
        g = p - y
        h = p * (1 - p)
        if h.sum() < 1e-12:
            warnings.warn("hessian sum vanished; stopping boosting early", stacklevel=2)
            break
        tree, leaf_of = grow_newton_tree(X, bins, g, h, max_depth, lambda_reg, min_child_weight)
        trees.append(tree)
        z = z + learning_rate * tree.value[leaf_of]
        losses.append(log_loss_from_logits(y, z))
    model = BoostedModel(base_logit=base, learning_rate=learning_rate, trees=trees, train_loss=losses)
    model.n_features_expected = X.shape[1]
    return model
