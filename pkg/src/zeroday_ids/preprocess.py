"""Standardization, correlation-based pruning and PCA.

Everything here is fitted on the training partition and then applied to
both partitions; the harness never hands test rows to a ``fit_*`` function
unless paper-faithful scaling is requested explicitly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset_io import Dataset


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class Scaler:
    means: np.ndarray
    stds: np.ndarray

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Scaler":
        return cls(np.asarray(doc["means"], float), np.asarray(doc["stds"], float))


def constant_columns(X: np.ndarray) -> np.ndarray:
    """Indices of zero-variance columns."""
    X = np.asarray(X, dtype=np.float64)
    return np.flatnonzero(np.all(X == X[:1], axis=0))


def fit_scaler(X) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise PreprocessError("need a 2-D matrix with at least 2 rows")
    if np.isnan(X).any():
        raise PreprocessError("NaN in input; clean the data first")
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1)
    const = constant_columns(X)
    if const.size:
        raise PreprocessError(f"zero-variance columns {const.tolist()}; prune them before scaling")
    return Scaler(means, stds)


def apply_scaler(s: Scaler, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != s.means.shape[0]:
        raise PreprocessError(
            f"scaler fitted on {s.means.shape[0]} columns, got shape {X.shape}"
        )
    return (X - s.means) / s.stds


def invert_scaler(s: Scaler, Z) -> np.ndarray:
    return np.asarray(Z, dtype=np.float64) * s.stds + s.means


@dataclass(frozen=True)
class CorrelationRanking:
    """Features sorted by absolute Pearson correlation with the label."""

    entries: tuple[tuple[str, float], ...]

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def to_csv_rows(self) -> list[tuple[str, float]]:
        return list(self.entries)


def correlation_rank(X, y, feature_names: Sequence[str] | None = None) -> CorrelationRanking:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise PreprocessError("X and y lengths differ")
    if not np.isin(y, (0.0, 1.0)).all() or np.unique(y).size != 2:
        raise PreprocessError("y must be binary with both classes present")
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(X.shape[1])]

    yc = y - y.mean()
    Xc = X - X.mean(axis=0)
    sx = np.sqrt((Xc * Xc).sum(axis=0))
    sy = np.sqrt((yc * yc).sum())
    cov = Xc.T @ yc
    r = np.zeros(X.shape[1])
    ok = sx > 0
    if not ok.all():
        warnings.warn(
            f"zero-variance features {[names[j] for j in np.flatnonzero(~ok)]}: correlation set to 0",
            stacklevel=2,
        )
    r[ok] = np.clip(cov[ok] / (sx[ok] * sy), -1.0, 1.0)
    order = sorted(range(len(names)), key=lambda j: (-abs(r[j]), j))
    return CorrelationRanking(tuple((names[j], float(r[j])) for j in order))


def kept_features(ranking: CorrelationRanking, min_abs_r: float) -> list[str]:
    """Names with |r| >= min_abs_r, best-first; never empty."""
    kept = [name for name, r in ranking.entries if abs(r) >= min_abs_r]
    return kept or [ranking.entries[0][0]]


def prune_features(d: Dataset, ranking: CorrelationRanking, min_abs_r: float) -> Dataset:
    """Drop features whose label correlation is below ``min_abs_r``.

    Surviving columns keep their original order. At least the single best
    feature is always retained.
    """
    keep = set(kept_features(ranking, min_abs_r))
    names = [n for n in d.feature_names if n in keep]
    return d.select_features(names)


@dataclass(frozen=True)
class PcaModel:
    all_components: np.ndarray  # (n_features, n_features), rows = eigenvectors
    eigenvalues: np.ndarray  # descending
    explained_variance_ratio: np.ndarray  # over all components
    n_components: int
    variance_threshold: float

    @property
    def components(self) -> np.ndarray:
        return self.all_components[: self.n_components]

    @property
    def selected_variance_ratio(self) -> np.ndarray:
        return self.explained_variance_ratio[: self.n_components]

    def to_dict(self) -> dict:
        return {
            "all_components": self.all_components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "n_components": self.n_components,
            "variance_threshold": self.variance_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "PcaModel":
        return cls(
            np.asarray(doc["all_components"], float),
            np.asarray(doc["eigenvalues"], float),
            np.asarray(doc["explained_variance_ratio"], float),
            int(doc["n_components"]),
            float(doc["variance_threshold"]),
        )


def select_n_components(ratio: np.ndarray, threshold: float) -> int:
    """Smallest k whose cumulative explained variance exceeds ``threshold``."""
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, threshold, side="right")) + 1
    return min(k, len(ratio))


def fit_pca(X, variance_threshold: float = 0.95) -> PcaModel:
    """Eigendecomposition of the sample covariance.

    Components come in descending eigenvalue order with each one's
    largest-magnitude coefficient made positive, so results do not depend
    on the LAPACK sign choice.
    """
    if not 0 < variance_threshold < 1:
        raise PreprocessError("variance_threshold must lie in (0, 1)")
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise PreprocessError("need at least 2 rows")
    if n <= d:
        warnings.warn(f"PCA on {n} rows x {d} features: covariance is rank-deficient", stacklevel=2)
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    comps = vecs[:, order].T
    lead = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(d), lead])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    total = vals.sum()
    if total <= 0:
        raise PreprocessError("input has zero total variance")
    ratio = vals / total
    k = select_n_components(ratio, variance_threshold)
    return PcaModel(comps, vals, ratio, k, float(variance_threshold))


def pca_transform(m: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.all_components.shape[1]:
        raise PreprocessError(
            f"PCA fitted on {m.all_components.shape[1]} features, got shape {X.shape}"
        )
    return X @ m.components.T


def pca_inverse_transform(m: PcaModel, Z) -> np.ndarray:
    return np.asarray(Z, dtype=np.float64) @ m.components
