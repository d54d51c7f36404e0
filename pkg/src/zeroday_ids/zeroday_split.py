"""Train/test partition with the rarest attack categories held out as zero-days."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import seeding
from .dataset_io import NORMAL, CategoryCount, Dataset

INJECT_MODES = ("shuffled", "append")


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    zero_day_categories: frozenset[str]
    train_fraction: float
    seed: int
    inject_mode: str = "shuffled"

    def to_dict(self) -> dict:
        return {
            "train_indices": self.train_indices.tolist(),
            "test_indices": self.test_indices.tolist(),
            "zero_day_categories": sorted(self.zero_day_categories),
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "inject_mode": self.inject_mode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitPlan":
        return cls(
            train_indices=np.asarray(doc["train_indices"], dtype=np.int64),
            test_indices=np.asarray(doc["test_indices"], dtype=np.int64),
            zero_day_categories=frozenset(doc["zero_day_categories"]),
            train_fraction=float(doc["train_fraction"]),
            seed=int(doc["seed"]),
            inject_mode=doc.get("inject_mode", "shuffled"),
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        return cls.from_dict(json.loads(text))

    def same_as(self, other: "SplitPlan") -> bool:
        return (
            np.array_equal(self.train_indices, other.train_indices)
            and np.array_equal(self.test_indices, other.test_indices)
            and self.zero_day_categories == other.zero_day_categories
            and self.train_fraction == other.train_fraction
            and self.seed == other.seed
            and self.inject_mode == other.inject_mode
        )


def select_zero_day_categories(counts: Iterable[CategoryCount], n: int) -> set[str]:
    """The ``n`` least frequent attack categories (ties broken by name)."""
    attacks = sorted((c.count, c.category) for c in counts if c.category != NORMAL)
    if n < 1:
        raise ValueError("n must be positive")
    if n >= len(attacks):
        raise ValueError(
            f"cannot hold out {n} of {len(attacks)} attack categories; need n < {len(attacks)}"
        )
    return {name for _, name in attacks[:n]}


def make_split(
    d: Dataset,
    train_fraction: float,
    zero_day_categories: Iterable[str],
    seed: int,
    inject_mode: str = "shuffled",
) -> SplitPlan:
    """Split rows so zero-day categories only ever reach the test set.

    Non-zero-day rows are divided ``train_fraction`` / rest, stratified by
    label. All zero-day rows join the held-out rows in the test set, either
    interleaved by a seeded permutation (``"shuffled"``) or concatenated at
    the end in row order (``"append"``).
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    if inject_mode not in INJECT_MODES:
        raise ValueError(f"inject_mode must be one of {INJECT_MODES}")
    zd = frozenset(zero_day_categories)
    if not zd:
        raise ValueError("zero_day_categories is empty")
    present = set(np.unique(d.attack_cat.astype(str)).tolist())
    missing = zd - present
    if missing:
        raise SplitError(f"zero-day categories not in dataset: {sorted(missing)}")
    if NORMAL in zd:
        raise SplitError("Normal cannot be a zero-day category")

    is_zd = np.isin(d.attack_cat, list(zd))
    rng = seeding.stage_rng(seed, seeding.SPLIT)
    train_parts, held_parts = [], []
    for cls in (0, 1):
        rows = np.flatnonzero((d.label == cls) & ~is_zd)
        if rows.size == 0:
            continue
        rows = rng.permutation(rows)
        m = int(round(train_fraction * rows.size))
        train_parts.append(rows[:m])
        held_parts.append(rows[m:])
    train = np.sort(np.concatenate(train_parts)) if train_parts else np.empty(0, np.int64)
    held = np.sort(np.concatenate(held_parts)) if held_parts else np.empty(0, np.int64)
    if train.size == 0:
        raise SplitError("train partition is empty")
    if held.size == 0:
        raise SplitError("held-out test partition is empty")

    zd_rows = np.flatnonzero(is_zd)
    if inject_mode == "shuffled":
        inj = seeding.stage_rng(seed, seeding.INJECT)
        test = inj.permutation(np.concatenate([held, zd_rows]))
    else:
        test = np.concatenate([held, zd_rows])
    return SplitPlan(
        train_indices=train.astype(np.int64),
        test_indices=test.astype(np.int64),
        zero_day_categories=zd,
        train_fraction=float(train_fraction),
        seed=int(seed),
        inject_mode=inject_mode,
    )


def materialize(d: Dataset, p: SplitPlan) -> tuple[Dataset, Dataset]:
    return d.take(p.train_indices), d.take(p.test_indices)


def zero_day_mask(test: Dataset, zero_day_categories: Iterable[str]) -> np.ndarray:
    return np.isin(test.attack_cat, list(zero_day_categories))
