from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import FittedModel, ModelError, check_xy, require_both_classes, sigmoid


@dataclass
class LogisticModel(FittedModel):
    weights: np.ndarray = None
    intercept: float = 0.0
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.family = "LR"

    def decision_function(self, X) -> np.ndarray:
        return self._check(X) @ self.weights + self.intercept

    def predict_score(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def _params(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept}


def logistic_objective(w, b, X, y, C):
    """Penalized mean log-loss and its gradient with respect to (w, b).

    The penalty is ``||w||^2 / (2 C n)``; the intercept is not penalized.
    """
    n = X.shape[0]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + (w @ w) / (2.0 * C * n)
    r = sigmoid(z) - y
    gw = X.T @ r / n + w / (C * n)
    gb = r.mean()
    return float(loss), gw, float(gb)


def fit_logistic(X, y, C=1.0, max_iter=100, tol=1e-6) -> LogisticModel:
    """Full-batch gradient descent with Armijo backtracking, started from
    zero weights and the prior log-odds intercept.

    Stops once the gradient norm drops below ``tol`` or after ``max_iter``
    iterations.
    """
    X, y = check_xy(X, y)
    require_both_classes(y)
    if C <= 0 or max_iter < 1:
        raise ModelError("need C > 0 and max_iter >= 1")
    d = X.shape[1]
    w = np.zeros(d)
    # the prior log-odds is the optimum at w = 0; strong penalties make the
    # intercept direction slow for plain gradient steps
    prior = y.mean()
    b = float(np.log(prior / (1 - prior)))
    loss, gw, gb = logistic_objective(w, b, X, y, C)
    history = [loss]
    step = 1.0
    for _ in range(max_iter):
        gnorm2 = gw @ gw + gb * gb
        if np.sqrt(gnorm2) < tol:
            break
        step = min(step * 2.0, 1e6)
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            new_loss, new_gw, new_gb = logistic_objective(w_new, b_new, X, y, C)
            if not np.isfinite(new_loss):
                if step < 1e-300:
                    raise ModelError("non-finite logistic loss; check feature scaling")
            elif new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-20:
                break
        if step < 1e-20:
            break
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        history.append(loss)
    if not np.isfinite(loss):
        raise ModelError("non-finite logistic loss; check feature scaling")
    model = LogisticModel(weights=w, intercept=b, loss_history=history)
    model.n_features_expected = d
    return model
