from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import FittedModel, ModelError, check_xy, sigmoid


@dataclass
class MLPModel(FittedModel):
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)
    epoch_loss: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.family = "MLP"

    def predict_score(self, X) -> np.ndarray:
        X = self._check(X)
        return sigmoid(forward(self.weights, self.biases, X)[-1]).ravel()

    def _params(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }


def init_params(layer_sizes, rng, zero=False):
    """Glorot-uniform weights, zero biases."""
    Ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        if zero:
            W = np.zeros((fan_in, fan_out))
        else:
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-lim, lim, size=(fan_in, fan_out))
        Ws.append(W)
        bs.append(np.zeros(fan_out))
    return Ws, bs


def forward(Ws, bs, X):
    """Pre-activations of every layer; the last entry is the output logit."""
    acts = []
    a = X
    for i, (W, b) in enumerate(zip(Ws, bs)):
        z = a @ W + b
        acts.append(z)
        a = np.maximum(z, 0.0) if i < len(Ws) - 1 else z
    return acts


def mlp_objective(Ws, bs, X, y, alpha):
    """Mean log-loss plus ``alpha * sum ||W||^2``, with backprop gradients."""
    n = X.shape[0]
    zs = forward(Ws, bs, X)
    logit = zs[-1].ravel()
    loss = np.mean(np.logaddexp(0.0, logit) - y * logit)
    loss += alpha * sum(float((W * W).sum()) for W in Ws)

    delta = ((sigmoid(logit) - y) / n)[:, None]
    gWs = [None] * len(Ws)
    gbs = [None] * len(Ws)
    for i in range(len(Ws) - 1, -1, -1):
        a_prev = X if i == 0 else np.maximum(zs[i - 1], 0.0)
        gWs[i] = a_prev.T @ delta + 2.0 * alpha * Ws[i]
        gbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ Ws[i].T) * (zs[i - 1] > 0)
    return float(loss), gWs, gbs


def _train(Ws, bs, X, y, alpha, lr, epochs, batch_size, rng):
    n = X.shape[0]
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, gWs, gbs = mlp_objective(Ws, bs, X[idx], y[idx], alpha)
            for W, gW in zip(Ws, gWs):
                W -= lr * gW
            for b, gb in zip(bs, gbs):
                b -= lr * gb
        loss = mlp_objective(Ws, bs, X, y, alpha)[0]
        if not np.isfinite(loss):
            return None
        history.append(loss)
    return history


def fit_mlp(
    X, y, hidden_layer_sizes=(32,), alpha=1e-4, learning_rate=0.01,
    epochs=50, batch_size=256, seed=0, zero_init=False,
) -> MLPModel:
    """ReLU network with a sigmoid output, trained by mini-batch gradient descent.

    If the loss diverges the run restarts once at half the learning rate.
    """
    X, y = check_xy(X, y)
    sizes = [int(s) for s in hidden_layer_sizes]
    if not sizes or min(sizes) < 1:
        raise ModelError("hidden_layer_sizes must be a non-empty list of positive ints")
    if alpha < 0 or epochs < 0 or batch_size < 1:
        raise ModelError("need alpha >= 0, epochs >= 0, batch_size >= 1")
    layers = [X.shape[1]] + sizes + [1]
    lr = learning_rate
    for _attempt in range(2):
        rng = np.random.default_rng(seed)
        Ws, bs = init_params(layers, rng, zero=zero_init)
        history = _train(Ws, bs, X, y, alpha, lr, epochs, batch_size, rng)
        if history is not None:
            break
        lr /= 2.0
    else:
        raise ModelError("MLP loss diverged even at half the learning rate")
    model = MLPModel(weights=Ws, biases=bs, epoch_loss=history)
    model.n_features_expected = X.shape[1]
    return model
