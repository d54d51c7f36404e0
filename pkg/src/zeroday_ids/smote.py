"""SMOTE oversampling of the attack class."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import seeding

_CHUNK_ELEMS = 1 << 22


class SmoteError(ValueError):
    pass


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    # "equalize", or a float giving the wanted ones/zeros ratio
    target: str | float = "equalize"
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if self.target != "equalize" and not (
            isinstance(self.target, (int, float)) and self.target > 0
        ):
            raise ValueError("target must be 'equalize' or a positive ratio")


@dataclass
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    # for each synthetic row (positions n_original...): base and neighbor
    # positions within the minority set, and the interpolation coefficient
    minority_rows: np.ndarray
    base: np.ndarray
    neighbor: np.ndarray
    u: np.ndarray
    summary: dict

    @property
    def n_synthetic(self) -> int:
        return len(self.u)

    def summary_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True)


def knn_minority(X_min, k: int) -> np.ndarray:
    """Indices of each row's ``k`` nearest other rows (Euclidean).

    Distance ties go to the lower index. ``k`` is clamped to ``n - 1``.
    """
    X = np.asarray(X_min, dtype=np.float64)
    m = X.shape[0]
    if m < 2:
        raise SmoteError("need at least 2 minority rows for neighbor search")
    if k >= m:
        warnings.warn(f"k_neighbors={k} >= {m} minority rows; clamping to {m - 1}", stacklevel=2)
        k = m - 1
    out = np.empty((m, k), dtype=np.int64)
    chunk = max(1, _CHUNK_ELEMS // max(1, m * X.shape[1]))
    for a in range(0, m, chunk):
        b = min(m, a + chunk)
        diff = X[a:b, None, :] - X[None, :, :]
        D = np.einsum("ijk,ijk->ij", diff, diff)
        D[np.arange(b - a), np.arange(a, b)] = np.inf
        if k < m - 1:
            part = np.argpartition(D, k - 1, axis=1)[:, :k]
            kth = D[np.arange(b - a)[:, None], part].max(axis=1)
        else:
            kth = np.full(b - a, np.inf)
        for r in range(b - a):
            cand = np.flatnonzero(D[r] <= kth[r])
            order = np.lexsort((cand, D[r, cand]))
            out[a + r] = cand[order[:k]]
    return out


def interpolate(base, neighbor, u):
    """Point(s) a fraction ``u`` of the way from ``base`` to ``neighbor``."""
    base = np.asarray(base, dtype=np.float64)
    neighbor = np.asarray(neighbor, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1 and base.ndim == 2:
        u = u[:, None]
    return base + u * (neighbor - base)


def smote(X, y, cfg: SmoteConfig = SmoteConfig()) -> SmoteResult:
    """Oversample label 1 by interpolating toward minority nearest neighbors.

    Base rows are visited round-robin in a seeded shuffled order; each
    synthetic row picks one of its base's ``k`` neighbors uniformly and a
    coefficient u from [0, 1). Original rows come first, unchanged.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int8)
    if X.shape[0] != y.shape[0]:
        raise SmoteError("X and y lengths differ")
    n0 = int((y == 0).sum())
    n1 = int((y == 1).sum())
    if n0 == 0 or n1 == 0:
        raise SmoteError("SMOTE needs both classes in y")

    if cfg.target == "equalize":
        want = n0
    else:
        want = int(round(float(cfg.target) * n0))
    n_new = max(0, want - n1)

    minority_rows = np.flatnonzero(y == 1)
    k = cfg.k_neighbors
    rng = seeding.stage_rng(cfg.seed, seeding.SMOTE)
    if n_new:
        X_min = X[minority_rows]
        if k >= n1:
            warnings.warn(f"k_neighbors={k} >= {n1} minority rows; clamping to {n1 - 1}", stacklevel=2)
            k = n1 - 1
        nbrs = knn_minority(X_min, k)
        order = rng.permutation(n1)
        base = order[np.arange(n_new) % n1]
        pick = rng.integers(0, k, size=n_new)
        u = rng.random(n_new)
        neighbor = nbrs[base, pick]
        synth = interpolate(X_min[base], X_min[neighbor], u)
        X_out = np.vstack([X, synth])
        y_out = np.concatenate([y, np.ones(n_new, dtype=np.int8)])
    else:
        base = neighbor = np.empty(0, dtype=np.int64)
        u = np.empty(0)
        X_out, y_out = X.copy(), y.copy()

    summary = {
        "zeros_before": n0,
        "ones_before": n1,
        "zeros_after": int((y_out == 0).sum()),
        "ones_after": int((y_out == 1).sum()),
        "k": int(k),
        "seed": int(cfg.seed),
    }
    return SmoteResult(X_out, y_out, minority_rows, base, neighbor, u, summary)


def smote_resample(X, y, cfg: SmoteConfig = SmoteConfig()) -> tuple[np.ndarray, np.ndarray]:
    res = smote(X, y, cfg)
    return res.X, res.y
