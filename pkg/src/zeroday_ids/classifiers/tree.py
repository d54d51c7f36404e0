"""Binary decision trees: impurity-based classification trees and the
second-order regression trees used by gradient boosting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import FittedModel, ModelError, check_xy

CRITERIA = ("entropy", "gini")


def entropy_impurity(class_counts) -> float:
    """Shannon entropy in bits of a (negatives, positives) count pair."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("class counts are both zero")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def gini_impurity(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("class counts are both zero")
    p = counts / total
    return float(1.0 - (p * p).sum())


def _midpoint(lo: float, hi: float) -> float:
    t = lo + (hi - lo) / 2.0
    # adjacent floats: the midpoint may round onto hi
    return lo if t >= hi else t


@dataclass
class TreeArrays:
    """Flat node storage; ``feature[i] < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        active = rows[self.feature[node] >= 0]
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_nodes(self) -> list[dict]:
        out = []
        for i in range(self.n_nodes):
            leaf = self.feature[i] < 0
            out.append({
                "feature": None if leaf else int(self.feature[i]),
                "threshold": None if leaf else float(self.threshold[i]),
                "left": None if leaf else int(self.left[i]),
                "right": None if leaf else int(self.right[i]),
                "leaf_value": float(self.value[i]) if leaf else None,
                "node_value": float(self.value[i]),
            })
        return out

    @classmethod
    def from_nodes(cls, nodes: list[dict]) -> "TreeArrays":
        feat = np.array([-1 if n["feature"] is None else n["feature"] for n in nodes], dtype=np.int64)
        thr = np.array([np.nan if n["threshold"] is None else n["threshold"] for n in nodes])
        left = np.array([-1 if n["left"] is None else n["left"] for n in nodes], dtype=np.int64)
        right = np.array([-1 if n["right"] is None else n["right"] for n in nodes], dtype=np.int64)
        val = np.array([n["node_value"] for n in nodes], dtype=np.float64)
        return cls(feat, thr, left, right, val)


class _Builder:
    """Node storage filled during depth-first growth."""

    def __init__(self, max_depth):
        self.max_depth = np.inf if max_depth is None else max_depth
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1


def _xlogx_table(n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(k > 0, k * np.log2(k), 0.0)
    return t


def _split_gains(pos_left, n, P, criterion, table):
    """Impurity decrease for every cut of a sorted node (left sizes 1..n-1)."""
    nl = np.arange(1, n)
    nr = n - nl
    pr = P - pos_left
    if criterion == "entropy":
        parent = table[n] - table[P] - table[n - P]
        child = (table[nl] - table[pos_left] - table[nl - pos_left]
                 + table[nr] - table[pr] - table[nr - pr])
        return (parent - child) / n
    parent = n - (P * P + (n - P) * (n - P)) / n
    child = (n - (pos_left ** 2 + (nl - pos_left) ** 2) / nl - (pr ** 2 + (nr - pr) ** 2) / nr)
    return (parent - child) / n


def _best_in_sorted(X, y_int, sorted_rows, features, criterion, min_samples_leaf, table):
    best = None
    best_gain = -np.inf
    msl = min_samples_leaf
    for f in features:
        rows = sorted_rows[f]
        n = rows.size
        xs = X[rows, f]
        valid = xs[1:] > xs[:-1]
        if msl > 1:
            valid[: msl - 1] = False
            valid[n - msl:] = False
        if not valid.any():
            continue
        cum = np.cumsum(y_int[rows])
        gain = _split_gains(cum[:-1], n, int(cum[-1]), criterion, table)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain = gain[i]
            best = (int(f), _midpoint(xs[i], xs[i + 1]), float(gain[i]))
    return best


def best_impurity_split(X, y, idx, features, criterion="entropy", min_samples_leaf=1):
    """Best (feature, threshold, gain) over midpoints of consecutive distinct values.

    Ties in gain go to the lower feature index, then the lower threshold.
    Returns None when no threshold satisfies ``min_samples_leaf``.
    """
    X = np.asarray(X, dtype=np.float64)
    idx = np.asarray(idx)
    y_int = np.asarray(y).astype(np.int64)
    sorted_rows = {f: idx[np.argsort(X[idx, f], kind="stable")] for f in features}
    table = _xlogx_table(idx.size)
    return _best_in_sorted(X, y_int, sorted_rows, features, criterion, min_samples_leaf, table)


@dataclass
class TreeModel(FittedModel):
    tree: TreeArrays = None
    criterion: str = "entropy"

    def __post_init__(self):
        self.family = "DT"

    def predict_score(self, X) -> np.ndarray:
        return self.tree.predict_value(self._check(X))

    def _params(self) -> dict:
        return {"criterion": self.criterion, "nodes": self.tree.to_nodes()}


def grow_classification_tree(
    X, y, criterion="entropy", max_depth=None, min_samples_leaf=1,
    max_features=None, rng=None, rows=None, presorted=None,
) -> TreeArrays:
    """Grow a tree whose leaves hold the positive fraction of their rows.

    ``max_features`` random candidate features are drawn per node when given
    (requires ``rng``); ``rows`` may repeat indices (bootstrap samples).
    Every feature is sorted once at the root (or taken from ``presorted``,
    the per-feature argsort of all of ``X``); children inherit the order by
    stable partitioning, so no node re-sorts.
    """
    if criterion not in CRITERIA:
        raise ModelError(f"criterion must be one of {CRITERIA}")
    n_all, d = X.shape
    rows = np.arange(n_all) if rows is None else np.asarray(rows)
    y_int = np.asarray(y).astype(np.int64)
    table = _xlogx_table(rows.size)
    subsample = max_features is not None and max_features < d
    all_features = np.arange(d)
    goes_left = np.zeros(n_all, dtype=bool)

    b = _Builder(max_depth)
    if presorted is not None:
        mult = np.bincount(rows, minlength=n_all)
        root_sorted = [np.repeat(o, mult[o]) for o in presorted]
    else:
        root_sorted = [rows[np.argsort(X[rows, f], kind="stable")] for f in range(d)]
    b._new(float(y_int[rows].mean()))
    stack = [(0, root_sorted, 0)]
    while stack:
        nid, srt, depth = stack.pop()
        n = srt[0].size
        if depth >= b.max_depth or n < 2 * min_samples_leaf:
            continue
        pos = int(y_int[srt[0]].sum())
        if pos == 0 or pos == n:
            continue
        feats = np.sort(rng.choice(d, size=max_features, replace=False)) if subsample else all_features
        best = _best_in_sorted(X, y_int, srt, feats, criterion, min_samples_leaf, table)
        if best is None:
            continue
        f, thr, _ = best
        node_rows = srt[f]
        goes_left[node_rows] = X[node_rows, f] <= thr
        left = []
        right = []
        for lst in srt:
            m = goes_left[lst]
            left.append(lst[m])
            right.append(lst[~m])
        b.feature[nid] = f
        b.threshold[nid] = thr
        lid = b._new(float(y_int[left[0]].mean()))
        rid = b._new(float(y_int[right[0]].mean()))
        b.left[nid], b.right[nid] = lid, rid
        stack.append((rid, right, depth + 1))
        stack.append((lid, left, depth + 1))
    return TreeArrays(
        np.array(b.feature, dtype=np.int64),
        np.array(b.threshold, dtype=np.float64),
        np.array(b.left, dtype=np.int64),
        np.array(b.right, dtype=np.int64),
        np.array(b.value, dtype=np.float64),
    )


def fit_tree(X, y, criterion="entropy", max_depth=None, min_samples_leaf=1) -> TreeModel:
    X, y = check_xy(X, y)
    if min_samples_leaf < 1:
        raise ModelError("min_samples_leaf must be >= 1")
    if max_depth is not None and max_depth < 1:
        raise ModelError("max_depth must be >= 1")
    tree = grow_classification_tree(X, y, criterion, max_depth, min_samples_leaf)
    m = TreeModel(tree=tree, criterion=criterion)
    m.n_features_expected = X.shape[1]
    return m


# ------------------------------------------------------------ Newton trees


@dataclass
class FeatureBins:
    """Per-feature cut points; a row goes left at cut c when x <= cuts[c].

    With at most ``max_bins`` distinct values the cuts are the midpoints
    between consecutive distinct values, i.e. exact greedy splitting.
    """

    cuts: list[np.ndarray]
    codes: np.ndarray  # (n_rows, d) bin index per cell, offset per feature
    offsets: np.ndarray  # start of each feature's bins in the flat histogram
    n_bins: np.ndarray

    @classmethod
    def build(cls, X: np.ndarray, max_bins: int = 256) -> "FeatureBins":
        n, d = X.shape
        cuts = []
        for j in range(d):
            u = np.unique(X[:, j])
            if u.size > max_bins:
                qs = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
                u = np.unique(np.concatenate([[u[0]], qs, [u[-1]]]))
            c = np.array([_midpoint(a, b) for a, b in zip(u[:-1], u[1:])])
            cuts.append(c)
        n_bins = np.array([c.size + 1 for c in cuts], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(n_bins)[:-1]])
        codes = np.empty((n, d), dtype=np.int64)
        for j in range(d):
            codes[:, j] = np.searchsorted(cuts[j], X[:, j], side="left") + offsets[j]
        return cls(cuts, codes, offsets, n_bins)


class _NodeHist:
    __slots__ = ("G", "H", "C")

    def __init__(self, G, H, C):
        self.G, self.H, self.C = G, H, C

    def __sub__(self, other):
        return _NodeHist(self.G - other.G, self.H - other.H, self.C - other.C)


def node_histogram(bins: FeatureBins, g, h, idx) -> _NodeHist:
    total = int(bins.offsets[-1] + bins.n_bins[-1])
    d = bins.codes.shape[1]
    flat = bins.codes[idx].ravel()
    G = np.bincount(flat, weights=np.repeat(g[idx], d), minlength=total)
    H = np.bincount(flat, weights=np.repeat(h[idx], d), minlength=total)
    C = np.bincount(flat, minlength=total).astype(np.float64)
    return _NodeHist(G, H, C)


def best_newton_split(bins: FeatureBins, hist: _NodeHist, lambda_reg, min_child_weight):
    """Best (feature, threshold, gain) by the second-order gain

    1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)]

    over the histogram cut points. The flat histogram is feature-major, so
    the first maximum is the lowest feature and the lowest cut.
    """
    starts = bins.offsets
    first = starts[0]
    # per-feature totals are equal; use feature 0's segment
    G = hist.G[first:first + bins.n_bins[0]].sum()
    H = hist.H[first:first + bins.n_bins[0]].sum()
    n = hist.C[first:first + bins.n_bins[0]].sum()
    cg, ch, cc = np.cumsum(hist.G), np.cumsum(hist.H), np.cumsum(hist.C)
    seg = np.repeat(np.arange(len(starts)), bins.n_bins)
    before = starts[seg] - 1
    base_g = np.where(before >= 0, cg[np.maximum(before, 0)], 0.0)
    base_h = np.where(before >= 0, ch[np.maximum(before, 0)], 0.0)
    base_c = np.where(before >= 0, cc[np.maximum(before, 0)], 0.0)
    GL, HL, CL = cg - base_g, ch - base_h, cc - base_c
    GR, HR, CR = G - GL, H - HL, n - CL
    last = np.zeros(len(seg), dtype=bool)
    last[starts + bins.n_bins - 1] = True
    ok = ~last & (CL > 0) & (CR > 0) & (HL >= min_child_weight) & (HR >= min_child_weight)
    if not ok.any():
        return None
    parent = G * G / (H + lambda_reg)
    gain = 0.5 * (GL * GL / (HL + lambda_reg) + GR * GR / (HR + lambda_reg) - parent)
    gain = np.where(ok, gain, -np.inf)
    k = int(np.argmax(gain))
    if not gain[k] > 1e-12:
        return None
    j = int(seg[k])
    return j, float(bins.cuts[j][k - starts[j]]), float(gain[k])


def grow_newton_tree(X, bins: FeatureBins, g, h, max_depth, lambda_reg, min_child_weight):
    """Grow one boosting tree; returns (tree, leaf index of every training row)."""
    b = _Builder(max_depth)
    n = X.shape[0]
    leaf_of = np.zeros(n, dtype=np.int64)

    def value(G, H):
        return float(-G / (H + lambda_reg))

    rows = np.arange(n)
    root = b._new(value(g.sum(), h.sum()))
    stack = [(root, rows, node_histogram(bins, g, h, rows), 0)]
    while stack:
        nid, idx, hist, depth = stack.pop()
        leaf_of[idx] = nid
        if depth >= b.max_depth or idx.size < 2:
            continue
        split = best_newton_split(bins, hist, lambda_reg, min_child_weight)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        b.feature[nid] = f
        b.threshold[nid] = thr
        lid = b._new(value(g[li].sum(), h[li].sum()))
        rid = b._new(value(g[ri].sum(), h[ri].sum()))
        b.left[nid], b.right[nid] = lid, rid
        if depth + 1 < b.max_depth:
            if li.size <= ri.size:
                lh = node_histogram(bins, g, h, li)
                rh = hist - lh
            else:
                rh = node_histogram(bins, g, h, ri)
                lh = hist - rh
        else:
            lh = rh = None
        stack.append((rid, ri, rh, depth + 1))
        stack.append((lid, li, lh, depth + 1))
    tree = TreeArrays(
        np.array(b.feature, dtype=np.int64),
        np.array(b.threshold, dtype=np.float64),
        np.array(b.left, dtype=np.int64),
        np.array(b.right, dtype=np.int64),
        np.array(b.value, dtype=np.float64),
    )
    return tree, leaf_of
