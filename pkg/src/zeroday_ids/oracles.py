"""Brute-force reference computations.

Each function here recomputes something the pipeline computes, by a
different and deliberately naive route, so the two can be compared.
Nothing in this module is used by the pipeline itself.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np
from scipy.stats import norm


def naive_confusion(y_true, y_pred) -> tuple[int, int, int, int]:
    tp = fp = fn = tn = 0
    for t, p in zip(y_true, y_pred):
        if t == 1 and p == 1:
            tp += 1
        elif t == 0 and p == 1:
            fp += 1
        elif t == 1 and p == 0:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def hand_metrics(tp, fp, fn, tn) -> dict[str, float]:
    n = tp + fp + fn + tn
    rec = tp / (tp + fn) if tp + fn else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    return {
        "accuracy": (tp + tn) / n,
        "recall": rec,
        "precision": prec,
        "f1": 2 * prec * rec / (prec + rec) if prec + rec else 0.0,
        "fpr": fp / (fp + tn) if fp + tn else 0.0,
    }


def pairwise_auc(y_true, scores) -> float:
    """Enumerate every (positive, negative) pair; ties count one half."""
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    pos = s[y == 1]
    neg = s[y == 0]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def svd_pca(X) -> tuple[np.ndarray, np.ndarray]:
    """(eigenvalues, components) of the sample covariance via SVD of centered X."""
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    _, sv, vt = np.linalg.svd(Xc, full_matrices=True)
    ev = np.zeros(X.shape[1])
    ev[: sv.size] = sv ** 2 / (X.shape[0] - 1)
    return ev, vt


def minimal_k(ratios, threshold) -> int:
    acc = 0.0
    for k, r in enumerate(ratios, start=1):
        acc += r
        if acc > threshold:
            return k
    return len(ratios)


def brute_knn(X, k) -> np.ndarray:
    """k nearest other rows by exhaustive sort on (distance, index)."""
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    for i in range(m):
        d = [(float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(m) if j != i]
        d.sort()
        out[i] = [j for _, j in d[:k]]
    return out


def segment_fit(point, a, b) -> tuple[float, float]:
    """(u, residual) of ``point`` against the segment a->b, by least squares."""
    v = b - a
    vv = float(v @ v)
    if vv == 0.0:
        return 0.0, float(np.linalg.norm(point - a))
    u = float((point - a) @ v / vv)
    return u, float(np.linalg.norm(point - (a + u * v)))


def synthetic_on_some_segment(point, X_min, nbrs, tol=1e-9) -> bool:
    """True if ``point`` lies on a segment from a minority row toward one of its
    neighbors, with coefficient in [0, 1)."""
    A = X_min[:, None, :]
    B = X_min[nbrs]
    V = B - A
    vv = np.einsum("ijk,ijk->ij", V, V)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.einsum("ijk,ijk->ij", point - A, V) / vv
    u = np.where(vv == 0, 0.0, u)
    resid = np.linalg.norm(point - (A + u[..., None] * V), axis=-1)
    scale = max(1.0, float(np.abs(point).max()))
    ok = (resid < tol * scale) & (u >= -tol) & (u < 1.0)
    return bool(ok.any())


def runs_test_pvalue(seq) -> float:
    """Two-sided Wald-Wolfowitz runs test p-value for a binary sequence."""
    s = np.asarray(seq).astype(bool)
    n1 = int(s.sum())
    n2 = s.size - n1
    if n1 == 0 or n2 == 0:
        return 1.0
    runs = 1 + int(np.count_nonzero(s[1:] != s[:-1]))
    n = n1 + n2
    mu = 2.0 * n1 * n2 / n + 1.0
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1))
    if var <= 0:
        return 1.0
    z = (runs - mu) / math.sqrt(var)
    return float(2.0 * norm.sf(abs(z)))


def exhaustive_split(X, y, criterion="entropy", min_samples_leaf=1):
    """Best (feature, threshold, gain) by trying every midpoint on every feature."""
    X = np.asarray(X, dtype=np.float64)
    y = [int(v) for v in y]
    n = len(y)

    def imp(pos, tot):
        if tot == 0:
            return 0.0
        p = pos / tot
        if criterion == "gini":
            return 1.0 - p * p - (1 - p) * (1 - p)
        return -sum(q * math.log2(q) for q in (p, 1 - p) if q > 0)

    parent = imp(sum(y), n)
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = lo + (hi - lo) / 2.0
            left = [y[i] for i in range(n) if X[i, f] <= thr]
            right = [y[i] for i in range(n) if X[i, f] > thr]
            if len(left) < min_samples_leaf or len(right) < min_samples_leaf:
                continue
            gain = parent - len(left) / n * imp(sum(left), len(left)) - len(right) / n * imp(
                sum(right), len(right)
            )
            if best is None or gain > best[2] + 1e-12:
                best = (f, thr, gain)
    return best


def central_difference(fun: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).copy()
    g = np.empty_like(x)
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + step
        hi = fun(x)
        x.flat[i] = orig - step
        lo = fun(x)
        x.flat[i] = orig
        g.flat[i] = (hi - lo) / (2 * step)
    return g


def relative_error(a, b) -> float:
    a = np.ravel(a)
    b = np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-300))


def exhaustive_grid_argmax(family, combos, X, y, fold, k, seed, scoring="accuracy"):
    """Independent re-run of a grid: own fold loop, own scoring, own argmax.

    Uses the same fold assignment and per-combo model seeds as the search
    under test, so the comparison is exact.
    """
    from . import seeding
    from .classifiers import ModelSpec, fit

    scores = []
    for i, combo in enumerate(combos):
        spec = ModelSpec(family, dict(combo), seeding.trial_seed(seed, i))
        per_fold = []
        for f in range(k):
            tr = [r for r in range(len(y)) if fold[r] != f]
            te = [r for r in range(len(y)) if fold[r] == f]
            m = fit(spec, X[tr], y[tr])
            pred = m.predict(X[te])
            per_fold.append(hand_metrics(*naive_confusion(y[te], pred))[scoring])
        scores.append(sum(per_fold) / k)
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best, scores


# ------------------------------------------------------------ CLI runner


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Run a quick pass of every oracle against the pipeline; (name, ok, detail)."""
    from .classifiers import fit_tree, logistic_objective, mlp_objective
    from .classifiers.tree import best_impurity_split
    from .preprocess import fit_pca
    from .smote import SmoteConfig, knn_minority, smote
    from .tuning_eval import confusion, metrics, roc_auc

    rng = np.random.default_rng(seed)
    results = []

    def check(name, fn):
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report, don't abort the run
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), f"{detail} ({time.perf_counter() - t0:.2f}s)"))

    def metrics_check():
        worst = 0.0
        for _ in range(200):
            yt = rng.integers(0, 2, 50)
            yp = rng.integers(0, 2, 50)
            cm = confusion(yt, yp)
            if (cm.tp, cm.fp, cm.fn, cm.tn) != naive_confusion(yt, yp):
                return False, "confusion counts differ"
            rep = metrics(cm)
            ref = hand_metrics(cm.tp, cm.fp, cm.fn, cm.tn)
            worst = max(worst, max(abs(getattr(rep, k) - v) for k, v in ref.items()))
        return worst <= 1e-12, f"max abs diff {worst:.2e}"

    def auc_check():
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(4, 120))
            yt = rng.integers(0, 2, n)
            yt[:2] = [0, 1]
            s = np.round(rng.random(n), 2)
            worst = max(worst, abs(roc_auc(yt, s) - pairwise_auc(yt, s)))
        return worst <= 1e-12, f"max abs diff {worst:.2e}"

    def pca_check():
        worst = 0.0
        for _ in range(5):
            X = rng.standard_normal((200, 30))
            X = (X - X.mean(0)) / X.std(0, ddof=1)
            m = fit_pca(X, 0.95)
            ev, vt = svd_pca(X)
            worst = max(worst, float(np.abs(m.eigenvalues - ev).max()))
            if m.n_components != minimal_k(m.explained_variance_ratio, 0.95):
                return False, "selected k not minimal"
        return worst <= 1e-8, f"max eigenvalue diff {worst:.2e}"

    def knn_check():
        X = rng.standard_normal((80, 5))
        same = np.array_equal(knn_minority(X, 5), brute_knn(X, 5))
        return same, "neighbor tables identical" if same else "neighbor tables differ"

    def smote_check():
        X = np.vstack([rng.standard_normal((300, 4)), rng.standard_normal((40, 4)) + 2])
        y = np.r_[np.zeros(300), np.ones(40)].astype(int)
        res = smote(X, y, SmoteConfig(5, "equalize", seed))
        Xmin = X[y == 1]
        nbrs = brute_knn(Xmin, 5)
        bad = sum(not synthetic_on_some_segment(p, Xmin, nbrs) for p in res.X[len(y):])
        equal = res.summary["ones_after"] == res.summary["zeros_after"]
        return bad == 0 and equal, f"{bad} off-segment synthetics, counts equal={equal}"

    def split_check():
        X = rng.standard_normal((100, 3))
        y = (X[:, 0] + 0.5 * rng.standard_normal(100) > 0).astype(int)
        got = best_impurity_split(X, y, np.arange(100), range(3), "entropy", 1)
        ref = exhaustive_split(X, y)
        ok = got[0] == ref[0] and got[1] == ref[1] and abs(got[2] - ref[2]) < 1e-12
        tree = fit_tree(X, y, max_depth=1)
        ok = ok and tree.tree.feature[0] == ref[0]
        return ok, f"pipeline {got[:2]} vs oracle {ref[:2]}"

    def grad_check():
        X = rng.standard_normal((10, 3))
        y = rng.integers(0, 2, 10).astype(float)
        w = rng.standard_normal(3)
        b = 0.3
        _, gw, gb = logistic_objective(w, b, X, y, 0.7)

        def f_lr(v):
            return logistic_objective(v[:3], v[3], X, y, 0.7)[0]

        e_lr = relative_error(np.r_[gw, gb], central_difference(f_lr, np.r_[w, b], 1e-6))
        X2 = X[:, :2]
        Ws = [rng.standard_normal((2, 3)), rng.standard_normal((3, 1))]
        bs = [rng.standard_normal(3), rng.standard_normal(1)]
        _, gWs, gbs = mlp_objective(Ws, bs, X2, y, 0.01)
        flat = np.concatenate([a.ravel() for a in Ws + bs])
        shapes = [a.shape for a in Ws + bs]

        def unflat(v):
            parts, i = [], 0
            for s in shapes:
                size = int(np.prod(s))
                parts.append(v[i:i + size].reshape(s))
                i += size
            return parts

        def f_mlp(v):
            p = unflat(v)
            return mlp_objective(p[:2], p[2:], X2, y, 0.01)[0]

        analytic = np.concatenate([a.ravel() for a in gWs + gbs])
        e_mlp = relative_error(analytic, central_difference(f_mlp, flat, 1e-5))
        return e_lr < 1e-6 and e_mlp < 1e-4, f"LR rel err {e_lr:.1e}, MLP rel err {e_mlp:.1e}"

    check("metrics vs hand formulas", metrics_check)
    check("ROC AUC vs pairwise enumeration", auc_check)
    check("PCA vs SVD eigendecomposition", pca_check)
    check("k-NN vs exhaustive sort", knn_check)
    check("SMOTE segment geometry", smote_check)
    check("tree root split vs exhaustive enumeration", split_check)
    check("LR/MLP gradients vs finite differences", grad_check)
    return results
