from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

FORMAT_VERSION = 1
FAMILIES = ("LR", "DT", "RF", "GBT", "MLP")


class ModelError(ValueError):
    pass


def sigmoid(z):
    return expit(z)


def log_loss(y, p, eps: float = 1e-15) -> float:
    """Mean binary cross-entropy of probabilities ``p``."""
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1 - eps)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def log_loss_from_logits(y, z) -> float:
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def check_xy(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError(f"expected a non-empty 2-D feature matrix, got shape {X.shape}")
    if y is None:
        return X
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ModelError("y length differs from X rows")
    if not np.isin(y, (0, 1)).all():
        raise ModelError("y must be 0/1")
    return X, y.astype(np.float64)


def require_both_classes(y):
    if np.unique(y).size != 2:
        raise ModelError("training labels contain a single class")


@dataclass
class FittedModel:
    """Common surface of every trained classifier.

    ``predict_score`` returns values in [0, 1]; ``predict`` labels a row 1
    when its score is at least 0.5 (random forests use the vote share).
    """

    family: str = field(init=False, default="")
    fit_time_seconds: float = field(init=False, default=0.0)
    n_features_expected: int = field(init=False, default=0)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_expected:
            raise ModelError(
                f"{self.family} model expects {self.n_features_expected} features, got shape {X.shape}"
            )
        return X

    def predict_score(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) >= 0.5).astype(np.int8)

    def predict_with_scores(self, X) -> tuple[np.ndarray, np.ndarray]:
        s = self.predict_score(X)
        return (s >= 0.5).astype(np.int8), s

    def _params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "family": self.family,
            "fit_time_seconds": self.fit_time_seconds,
            "n_features_expected": self.n_features_expected,
            "params": self._params(),
        }
