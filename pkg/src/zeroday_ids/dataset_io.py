"""Loading, cleaning, subsampling and synthesis of UNSW-NB15-style flow tables."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import seeding

log = logging.getLogger(__name__)

NORMAL = "Normal"
ATTACK_CATEGORIES = (
    "Generic",
    "Exploits",
    "Fuzzers",
    "DoS",
    "Reconnaissance",
    "Analysis",
    "Backdoor",
    "Shellcode",
    "Worms",
)
CANONICAL_CATEGORIES = (NORMAL,) + ATTACK_CATEGORIES

# lower-cased raw spelling -> canonical name
_CATEGORY_ALIASES = {c.lower(): c for c in CANONICAL_CATEGORIES}
_CATEGORY_ALIASES.update({"backdoors": "Backdoor", "benign": NORMAL})

# Per-category record counts of the selected half of UNSW-NB15.
HALF_SET_COUNTS = {
    "Generic": 35_405,
    "Exploits": 16_512,
    "Fuzzers": 9_719,
    "DoS": 5_804,
    "Reconnaissance": 4_875,
    "Analysis": 1_134,
    "Backdoor": 904,
    "Shellcode": 547,
    "Worms": 64,
    NORMAL: 1_325_038,
}
HALF_SET_ATTACKS = sum(v for k, v in HALF_SET_COUNTS.items() if k != NORMAL)
HALF_SET_CATEGORY_MIX = {
    k: v / HALF_SET_ATTACKS for k, v in HALF_SET_COUNTS.items() if k != NORMAL
}

LABEL_NAMES = ("label",)
CATEGORY_NAMES = ("attack_cat", "attack-cat")

_CHUNK_ROWS = 100_000


class DataError(ValueError):
    """Input data violates a loading or cleaning precondition."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    feature_names: tuple[str, ...]
    label: np.ndarray
    attack_cat: np.ndarray
    # text of feature cells that did not parse as numbers; None where they did
    raw_text: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1:
            raise DataError("dataset has no rows")
        if len(self.feature_names) != d:
            raise DataError(
                f"{len(self.feature_names)} feature names for {d} feature columns"
            )
        y = np.asarray(self.label, dtype=np.int8)
        cat = np.asarray(self.attack_cat, dtype=object)
        if y.shape != (n,) or cat.shape != (n,):
            raise DataError("label / attack_cat length differs from row count")
        if not np.isin(y, (0, 1)).all():
            raise DataError("label must be 0/1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label", y)
        object.__setattr__(self, "attack_cat", cat)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_rows):
            raise IndexError(f"row index out of range for {self.n_rows} rows")
        raw = None
        if self.raw_text:
            raw = {k: v[idx] for k, v in self.raw_text.items()}
        return Dataset(
            self.features[idx], self.feature_names, self.label[idx],
            self.attack_cat[idx], raw,
        )

    def select_features(self, names: Sequence[str]) -> "Dataset":
        pos = {n: j for j, n in enumerate(self.feature_names)}
        cols = [pos[n] for n in names]
        raw = None
        if self.raw_text:
            raw = {k: v for k, v in self.raw_text.items() if k in names}
        return Dataset(
            self.features[:, cols], tuple(names), self.label, self.attack_cat, raw or None
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.label, other.label)
            and np.array_equal(self.attack_cat, other.attack_cat)
        )

    def is_consistent(self) -> bool:
        """label 0 exactly on Normal rows, label 1 exactly on canonical attack rows."""
        normal = self.attack_cat == NORMAL
        attack = np.isin(self.attack_cat, ATTACK_CATEGORIES)
        return bool(np.all(normal == (self.label == 0)) and np.all(attack == (self.label == 1)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.feature_names) + ["attack_cat", "Label"])
            for row, cat, y in zip(self.features, self.attack_cat, self.label):
                w.writerow([repr(float(v)) for v in row] + [cat, int(y)])


@dataclass(frozen=True)
class CategoryCount:
    category: str
    count: int
    percentage: float


@dataclass
class CleaningSummary:
    rows_in: int
    rows_out: int
    dropped_rows: int
    null_categories_fixed: int
    encodings: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "dropped_rows": self.dropped_rows,
            "null_categories_fixed": self.null_categories_fixed,
            "encodings": self.encodings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class SynthConfig:
    n_rows: int = 50_000
    n_features: int = 12
    attack_fraction: float = HALF_SET_ATTACKS / 1_400_002
    category_mix: dict[str, float] = field(default_factory=lambda: dict(HALF_SET_CATEGORY_MIX))
    class_separation: float = 3.0
    noise_std: float = 1.0
    seed: int = 0
    # distance of each category's sub-center from the attack centroid, as a
    # multiple of class_separation
    category_spread: float = 0.6

    def __post_init__(self):
        if self.n_rows < 1 or self.n_features < 1:
            raise ValueError("n_rows and n_features must be positive")
        if not 0 < self.attack_fraction < 1:
            raise ValueError("attack_fraction must lie in (0, 1)")
        if self.class_separation < 0 or self.noise_std <= 0:
            raise ValueError("class_separation must be >= 0 and noise_std > 0")
        total = sum(self.category_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"category_mix fractions sum to {total}, expected 1")
        bad = set(self.category_mix) - set(ATTACK_CATEGORIES)
        if bad:
            raise ValueError(f"unknown attack categories in category_mix: {sorted(bad)}")

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_features": self.n_features,
            "attack_fraction": self.attack_fraction,
            "category_mix": dict(self.category_mix),
            "class_separation": self.class_separation,
            "noise_std": self.noise_std,
            "seed": self.seed,
            "category_spread": self.category_spread,
        }


# ---------------------------------------------------------------- loading


def _find_column(header: list[str], names: Iterable[str]) -> int | None:
    wanted = {n.lower() for n in names}
    for j, h in enumerate(header):
        if h.strip().lower() in wanted:
            return j
    return None


def _read_sidecar_names(path: Path) -> list[str] | None:
    for cand in (path.with_suffix(".names"), path.with_name(path.stem + "_features.txt")):
        if cand.exists():
            lines = cand.read_text(encoding="utf-8").splitlines()
            return [ln.strip() for ln in lines if ln.strip()]
    return None


def _parse_column(values: list[str]) -> tuple[np.ndarray, np.ndarray | None]:
    """Parse one column chunk to floats; unparseable cells become NaN and keep their text."""
    try:
        return np.array(values, dtype=np.float64), None
    except ValueError:
        pass
    out = np.empty(len(values), dtype=np.float64)
    text = np.full(len(values), None, dtype=object)
    for i, v in enumerate(values):
        try:
            out[i] = float(v)
        except ValueError:
            out[i] = np.nan
            text[i] = v
    return out, text


def load_csv(path, has_header: bool = True, feature_names: Sequence[str] | None = None) -> Dataset:
    """Read a flow CSV into a raw :class:`Dataset`.

    With a header the label and category columns are found by name
    (``Label``/``label`` and ``attack_cat``, case-insensitive). Without one
    they are the last two columns, ``attack_cat`` then ``Label``, and the
    feature names come from ``feature_names``, a sidecar ``<file>.names``, or
    default to ``f0, f1, ...``.

    Feature cells that are not plain numbers are stored as NaN with their
    text kept in ``raw_text`` until :func:`clean` resolves them.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise DataError(f"{path}: empty file")
        width = len(first)
        if has_header:
            header = [h.strip() for h in first]
            label_col = _find_column(header, LABEL_NAMES)
            cat_col = _find_column(header, CATEGORY_NAMES)
            if label_col is None or cat_col is None:
                raise DataError(f"{path}: header lacks Label/attack_cat columns")
            pending: list[list[str]] = []
        else:
            cat_col, label_col = width - 2, width - 1
            pending = [first]
        feat_cols = [j for j in range(width) if j not in (label_col, cat_col)]

        if has_header:
            names = [header[j] for j in feat_cols]
        else:
            names = list(feature_names) if feature_names is not None else _read_sidecar_names(path)
            if names is not None and len(names) == width:
                names = [names[j] for j in feat_cols]
            if names is None:
                names = [f"f{j}" for j in range(len(feat_cols))]
            if len(names) != len(feat_cols):
                raise DataError(
                    f"{path}: {len(names)} feature names for {len(feat_cols)} feature columns"
                )

        blocks: list[np.ndarray] = []
        text_blocks: dict[int, list[np.ndarray | None]] = {}
        labels: list[np.ndarray] = []
        cats: list[np.ndarray] = []
        n_done = 0

        def flush(rows: list[list[str]]):
            nonlocal n_done
            if not rows:
                return
            cols = list(zip(*rows))
            lab = [s.strip() for s in cols[label_col]]
            try:
                lab_arr = np.array(lab, dtype=np.float64)
            except ValueError:
                lab_arr = None
            if lab_arr is None or not np.isin(lab_arr, (0.0, 1.0)).all():
                bad = next(i for i, s in enumerate(lab) if s not in ("0", "1", "0.0", "1.0"))
                raise DataError(
                    f"{path}: label value {lab[bad]!r} is not 0/1 (data row {n_done + bad + 1})"
                )
            labels.append(lab_arr.astype(np.int8))
            cats.append(np.array([s.strip() for s in cols[cat_col]], dtype=object))
            block = np.empty((len(rows), len(feat_cols)), dtype=np.float64)
            for k, j in enumerate(feat_cols):
                vals, text = _parse_column(list(cols[j]))
                block[:, k] = vals
                if text is not None or k in text_blocks:
                    prev = text_blocks.setdefault(k, [None] * len(blocks))
                    prev.append(text)
            blocks.append(block)
            n_done += len(rows)

        line_no = 1
        for row in reader:
            line_no += 1
            if len(row) != width:
                raise DataError(
                    f"{path}: line {line_no} has {len(row)} fields, expected {width}"
                )
            pending.append(row)
            if len(pending) >= _CHUNK_ROWS:
                flush(pending)
                pending = []
        flush(pending)

    if not blocks:
        raise DataError(f"{path}: no data rows")
    X = np.vstack(blocks)
    raw_text = None
    if text_blocks:
        raw_text = {}
        for k, parts in text_blocks.items():
            col = np.full(X.shape[0], None, dtype=object)
            start = 0
            for part, block in zip(parts, blocks):
                if part is not None:
                    col[start:start + len(block)] = part
                start += len(block)
            raw_text[names[k]] = col
    return Dataset(X, tuple(names), np.concatenate(labels), np.concatenate(cats), raw_text)


# ---------------------------------------------------------------- cleaning


def canonical_category(raw: str) -> str | None:
    """Canonical spelling of a category name, or None when unrecognized/empty."""
    key = str(raw).strip().lower()
    if not key:
        return None
    return _CATEGORY_ALIASES.get(key)


def _parse_hex(s: str) -> float | None:
    t = s.strip()
    if t[:2].lower() == "0x":
        try:
            return float(int(t, 16))
        except ValueError:
            return None
    return None


def _resolve_text_column(values: np.ndarray, text: np.ndarray):
    """Resolve unparsed cells of one column.

    Returns (new values, encoding or None). A column whose text cells are
    mostly non-numeric tokens is treated as categorical and integer-encoded
    in first-seen order; otherwise hex strings are parsed and anything else
    stays NaN (the row is dropped later).
    """
    n = len(values)
    has_text = np.array([t is not None for t in text])
    resolved = values.copy()
    token_rows = []
    for i in np.flatnonzero(has_text):
        t = text[i]
        h = _parse_hex(t)
        if h is not None:
            resolved[i] = h
        elif t.strip():
            token_rows.append(i)
    if len(token_rows) * 2 < n:
        return resolved, None

    encoding: dict[str, int] = {}
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        key = text[i].strip() if text[i] is not None else repr(float(values[i]))
        code = encoding.setdefault(key, len(encoding))
        out[i] = code
    return out, encoding


def clean(raw: Dataset) -> tuple[Dataset, CleaningSummary]:
    """Normalize categories, coerce text fields to numbers, drop unusable rows.

    Returns the cleaned dataset together with a summary of what was changed.
    Raises :class:`DataError` for attack rows without a category, and for
    rows whose label disagrees with their category.
    """
    n = raw.n_rows
    cats = np.empty(n, dtype=object)
    fixed = 0
    missing_attack = []
    unknown = []
    for i, (c, y) in enumerate(zip(raw.attack_cat, raw.label)):
        canon = canonical_category(c if c is not None else "")
        if canon is None:
            if str(c if c is not None else "").strip():
                unknown.append(i)
            elif y == 0:
                canon = NORMAL
                fixed += 1
            else:
                missing_attack.append(i)
        cats[i] = canon
    if missing_attack:
        raise DataError(
            f"attack rows (label=1) with empty attack_cat at rows {missing_attack[:20]}"
            + (" ..." if len(missing_attack) > 20 else "")
        )
    if unknown:
        raise DataError(
            f"unrecognized attack_cat values {sorted({str(raw.attack_cat[i]).strip() for i in unknown})}"
            f" at rows {unknown[:20]}"
        )
    mismatch = np.flatnonzero((cats == NORMAL) != (raw.label == 0))
    if mismatch.size:
        raise DataError(f"label/attack_cat disagree at rows {mismatch[:20].tolist()}")

    X = raw.features.copy()
    encodings: dict[str, dict[str, int]] = {}
    if raw.raw_text:
        for j, name in enumerate(raw.feature_names):
            text = raw.raw_text.get(name)
            if text is None:
                continue
            X[:, j], enc = _resolve_text_column(X[:, j], text)
            if enc is not None:
                encodings[name] = enc

    keep = np.isfinite(X).all(axis=1)
    dropped = int(n - keep.sum())
    if dropped:
        log.info("dropping %d rows with unparseable numeric fields", dropped)
    if not keep.any():
        raise DataError("no rows survive cleaning")
    out = Dataset(X[keep], raw.feature_names, raw.label[keep], cats[keep])
    summary = CleaningSummary(
        rows_in=n,
        rows_out=int(keep.sum()),
        dropped_rows=dropped,
        null_categories_fixed=fixed,
        encodings=encodings,
    )
    return out, summary


def category_counts(d: Dataset) -> list[CategoryCount]:
    names, counts = np.unique(d.attack_cat.astype(str), return_counts=True)
    order = sorted(range(len(names)), key=lambda i: (-counts[i], names[i]))
    n = d.n_rows
    return [CategoryCount(str(names[i]), int(counts[i]), 100.0 * counts[i] / n) for i in order]


# ---------------------------------------------------------------- sampling


def subsample(d: Dataset, fraction: float, seed: int, stratify_by: str = "category") -> Dataset:
    """Seeded subsample keeping ``fraction`` of the rows, in original row order.

    ``stratify_by`` is ``"category"``, ``"label"`` or ``"none"``. A stratum
    that would round to zero rows keeps one row.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if fraction * d.n_rows < 1:
        raise ValueError("fraction * n_rows < 1: nothing to keep")
    rng = seeding.stage_rng(seed, seeding.SUBSAMPLE)
    if stratify_by == "category":
        keys = d.attack_cat.astype(str)
    elif stratify_by == "label":
        keys = d.label.astype(str)
    elif stratify_by == "none":
        keys = np.zeros(d.n_rows, dtype=str)
    else:
        raise ValueError(f"unknown stratify_by {stratify_by!r}")

    chosen = []
    for key in sorted(set(keys.tolist())):
        rows = np.flatnonzero(keys == key)
        m = int(round(fraction * len(rows)))
        if m == 0:
            warnings.warn(f"stratum {key!r} rounds to 0 rows; keeping 1", stacklevel=2)
            m = 1
        chosen.append(rng.permutation(rows)[:m])
    idx = np.sort(np.concatenate(chosen))
    return d.take(idx)


def _apportion(total: int, mix: dict[str, float]) -> dict[str, int]:
    """Largest-remainder split of ``total`` rows over ``mix`` (fixed key order)."""
    keys = list(mix)
    exact = np.array([mix[k] * total for k in keys])
    base = np.floor(exact).astype(int)
    rest = total - base.sum()
    order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return {k: int(c) for k, c in zip(keys, base)}


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def synthesize(cfg: SynthConfig) -> Dataset:
    """Gaussian stand-in for the flow table with a controllable class overlap.

    Points live in a latent space of half the feature count: normal traffic
    around the origin, attacks around a centroid ``class_separation`` away,
    each attack category around its own sub-center offset from that
    centroid. Latent points are mixed linearly into the observed features
    (so features are correlated), given a small independent noise, and each
    feature is rescaled to its own unit so standardization matters.
    """
    rng = np.random.default_rng(seeding.stage_seed(cfg.seed, seeding.SYNTH))
    n_attack = int(round(cfg.attack_fraction * cfg.n_rows))
    n_normal = cfg.n_rows - n_attack
    per_cat = _apportion(n_attack, cfg.category_mix)
    for cat, c in list(per_cat.items()):
        if c == 0:
            warnings.warn(f"category {cat!r} gets 0 rows; omitted", stacklevel=2)
            del per_cat[cat]

    latent = max(2, math.ceil(cfg.n_features / 2))
    direction = _unit(rng, latent)
    centroid = cfg.class_separation * direction
    spread = cfg.category_spread * cfg.class_separation

    parts = [rng.normal(0.0, cfg.noise_std, size=(n_normal, latent))]
    cats = [np.full(n_normal, NORMAL, dtype=object)]
    for cat in ATTACK_CATEGORIES:
        offset = _unit(rng, latent)
        c = per_cat.get(cat, 0)
        if c == 0:
            continue
        center = centroid + spread * offset
        parts.append(center + rng.normal(0.0, cfg.noise_std, size=(c, latent)))
        cats.append(np.full(c, cat, dtype=object))
    Z = np.vstack(parts)
    cat_arr = np.concatenate(cats)

    mixing = rng.standard_normal((latent, cfg.n_features)) / math.sqrt(latent)
    X = Z @ mixing + rng.normal(0.0, 0.1 * cfg.noise_std, size=(cfg.n_rows, cfg.n_features))
    scales = 10.0 ** rng.uniform(-1.0, 3.0, size=cfg.n_features)
    X = X * scales

    order = rng.permutation(cfg.n_rows)
    X, cat_arr = X[order], cat_arr[order]
    y = (cat_arr != NORMAL).astype(np.int8)
    names = tuple(f"f{j:02d}" for j in range(cfg.n_features))
    return Dataset(X, names, y, cat_arr)
