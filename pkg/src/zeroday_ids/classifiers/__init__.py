"""Five binary classifiers behind one fit / predict / predict_score surface."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .base import FAMILIES, FORMAT_VERSION, FittedModel, ModelError, log_loss, sigmoid
from .boosting import BoostedModel, fit_gbt
from .forest import ForestModel, fit_forest
from .logistic import LogisticModel, fit_logistic, logistic_objective
from .mlp import MLPModel, fit_mlp, mlp_objective
from .tree import TreeArrays, TreeModel, entropy_impurity, fit_tree, gini_impurity

# Grid-search winners reported for the full dataset, plus our own defaults
# for the knobs no value was reported for.
DEFAULT_HYPERPARAMETERS = {
    "LR": {"C": 0.1, "max_iter": 200, "tol": 1e-6},
    "DT": {"criterion": "entropy", "max_depth": 10, "min_samples_leaf": 1},
    "RF": {"n_estimators": 200, "criterion": "entropy", "max_depth": 10, "min_samples_leaf": 1},
    "GBT": {"learning_rate": 0.1, "max_depth": 7, "n_rounds": 100, "lambda_reg": 1.0,
            "min_child_weight": 1.0},
    "MLP": {"hidden_layer_sizes": (32,), "alpha": 1e-4, "learning_rate": 0.01, "epochs": 50,
            "batch_size": 256},
}

_ALLOWED = {
    "LR": {"C", "max_iter", "tol"},
    "DT": {"criterion", "max_depth", "min_samples_leaf"},
    "RF": {"n_estimators", "criterion", "max_depth", "min_samples_leaf", "max_features"},
    "GBT": {"learning_rate", "max_depth", "n_rounds", "lambda_reg", "min_child_weight", "max_bins"},
    "MLP": {"hidden_layer_sizes", "alpha", "learning_rate", "epochs", "batch_size", "zero_init"},
}


@dataclass
class ModelSpec:
    family: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.hyperparameters) - _ALLOWED[self.family]
        if unknown:
            raise ModelError(f"invalid hyperparameters for {self.family}: {sorted(unknown)}")
        validate_hyperparameters(self.family, self.resolved())

    def resolved(self) -> dict:
        hp = dict(DEFAULT_HYPERPARAMETERS[self.family])
        hp.update(self.hyperparameters)
        return hp

    def with_params(self, **params) -> "ModelSpec":
        hp = dict(self.hyperparameters)
        hp.update(params)
        return ModelSpec(self.family, hp, self.seed)


def validate_hyperparameters(family: str, hp: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise ModelError(f"{family}: {msg}")

    if family == "LR":
        need(hp["C"] > 0, "C must be > 0")
        need(hp["max_iter"] >= 1, "max_iter must be >= 1")
    if family in ("DT", "RF"):
        need(hp["criterion"] in ("entropy", "gini"), "criterion must be entropy or gini")
        need(hp["max_depth"] is None or hp["max_depth"] >= 1, "max_depth must be >= 1")
        need(hp["min_samples_leaf"] >= 1, "min_samples_leaf must be >= 1")
    if family == "RF":
        need(hp["n_estimators"] >= 1, "n_estimators must be >= 1")
    if family == "GBT":
        need(0 < hp["learning_rate"] <= 1, "learning_rate must lie in (0, 1]")
        need(hp["max_depth"] >= 1, "max_depth must be >= 1")
        need(hp["n_rounds"] >= 0, "n_rounds must be >= 0")
        need(hp["lambda_reg"] >= 0, "lambda_reg must be >= 0")
    if family == "MLP":
        sizes = hp["hidden_layer_sizes"]
        need(len(sizes) > 0 and all(int(s) >= 1 for s in sizes), "hidden_layer_sizes must be positive")
        need(hp["alpha"] >= 0, "alpha must be >= 0")


def fit(spec: ModelSpec, X, y) -> FittedModel:
    """Train the model described by ``spec``; records wall-clock fit time."""
    hp = spec.resolved()
    t0 = time.perf_counter()
    if spec.family == "LR":
        m = fit_logistic(X, y, hp["C"], hp["max_iter"], hp["tol"])
    elif spec.family == "DT":
        m = fit_tree(X, y, hp["criterion"], hp["max_depth"], hp["min_samples_leaf"])
    elif spec.family == "RF":
        m = fit_forest(
            X, y, hp["n_estimators"], hp["criterion"], hp["max_depth"], spec.seed,
            hp["min_samples_leaf"], hp.get("max_features", "sqrt"),
        )
    elif spec.family == "GBT":
        m = fit_gbt(
            X, y, hp["learning_rate"], hp["max_depth"], hp["n_rounds"], hp["lambda_reg"],
            hp["min_child_weight"], hp.get("max_bins", 256),
        )
    else:
        m = fit_mlp(
            X, y, tuple(hp["hidden_layer_sizes"]), hp["alpha"], hp["learning_rate"],
            hp["epochs"], hp["batch_size"], spec.seed, hp.get("zero_init", False),
        )
    m.fit_time_seconds = time.perf_counter() - t0
    return m


def predict(m: FittedModel, X) -> np.ndarray:
    return m.predict(X)


def predict_score(m: FittedModel, X) -> np.ndarray:
    return m.predict_score(X)


def model_to_json(m: FittedModel) -> str:
    return json.dumps(m.to_dict())


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {doc.get('format_version')}")
    fam = doc["family"]
    p = doc["params"]
    if fam == "LR":
        m = LogisticModel(weights=np.asarray(p["weights"], float), intercept=float(p["intercept"]))
    elif fam == "DT":
        m = TreeModel(tree=TreeArrays.from_nodes(p["nodes"]), criterion=p["criterion"])
    elif fam == "RF":
        m = ForestModel(trees=[TreeArrays.from_nodes(t) for t in p["trees"]], criterion=p["criterion"])
    elif fam == "GBT":
        m = BoostedModel(
            base_logit=float(p["base_logit"]), learning_rate=float(p["learning_rate"]),
            trees=[TreeArrays.from_nodes(t) for t in p["trees"]],
        )
    elif fam == "MLP":
        m = MLPModel(
            weights=[np.asarray(w, float) for w in p["weights"]],
            biases=[np.asarray(b, float) for b in p["biases"]],
        )
    else:
        raise ModelError(f"unknown family {fam!r}")
    m.fit_time_seconds = float(doc["fit_time_seconds"])
    m.n_features_expected = int(doc["n_features_expected"])
    return m


def model_from_json(text: str) -> FittedModel:
    return model_from_dict(json.loads(text))


__all__ = [
    "FAMILIES", "DEFAULT_HYPERPARAMETERS", "ModelSpec", "ModelError", "FittedModel",
    "LogisticModel", "TreeModel", "ForestModel", "BoostedModel", "MLPModel", "TreeArrays",
    "fit", "predict", "predict_score", "fit_logistic", "fit_tree", "fit_forest", "fit_gbt",
    "fit_mlp", "entropy_impurity", "gini_impurity", "logistic_objective", "mlp_objective",
    "log_loss", "sigmoid", "model_to_json", "model_from_dict", "model_from_json",
    "validate_hyperparameters",
]
