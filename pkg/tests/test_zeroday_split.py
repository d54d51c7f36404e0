import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeroday_ids.dataset_io import (
    ATTACK_CATEGORIES,
    HALF_SET_COUNTS,
    CategoryCount,
    Dataset,
    category_counts,
)
from zeroday_ids.oracles import runs_test_pvalue
from zeroday_ids.zeroday_split import (
    SplitError,
    SplitPlan,
    make_split,
    materialize,
    select_zero_day_categories,
    zero_day_mask,
)

from conftest import make_dataset


def half_set_counts():
    n = sum(HALF_SET_COUNTS.values())
    return [CategoryCount(k, v, 100 * v / n) for k, v in HALF_SET_COUNTS.items()]


def test_half_set_four_rarest():
    assert select_zero_day_categories(half_set_counts(), 4) == {"Worms", "Shellcode", "Backdoor", "Analysis"}


def test_half_set_rarest_one():
    assert select_zero_day_categories(half_set_counts(), 1) == {"Worms"}


def test_tie_break_by_name():
    counts = [CategoryCount("C", 9, 0), CategoryCount("B", 5, 0), CategoryCount("A", 5, 0)]
    # A/B/C are not canonical names, but selection only needs non-Normal entries
    assert select_zero_day_categories(counts, 1) == {"A"}


def test_normal_never_selected():
    counts = [CategoryCount("Normal", 1, 0), CategoryCount("DoS", 5, 0), CategoryCount("Worms", 9, 0)]
    assert select_zero_day_categories(counts, 1) == {"DoS"}


def test_n_too_large():
    counts = [CategoryCount("Normal", 10, 0), CategoryCount("DoS", 5, 0), CategoryCount("Worms", 9, 0)]
    with pytest.raises(ValueError):
        select_zero_day_categories(counts, 2)


def rows_dataset(n_normal, n_attack, n_zd, zd_cat="Worms"):
    cats = ["Normal"] * n_normal + ["DoS"] * n_attack + [zd_cat] * n_zd
    return make_dataset(np.arange(len(cats)), cats)


def test_seventy_thirty_on_thousand():
    d = rows_dataset(900, 100, 20)
    p = make_split(d, 0.7, {"Worms"}, seed=0)
    assert abs(p.train_indices.size - 700) <= 1
    assert p.test_indices.size == d.n_rows - p.train_indices.size


def test_all_attacks_zero_day_gives_normal_only_train():
    cats = ["Normal"] * 50 + ["DoS"] * 5 + ["Worms"] * 3
    d = make_dataset(np.arange(len(cats)), cats)
    p = make_split(d, 0.7, {"DoS", "Worms"}, seed=1)
    assert set(d.attack_cat[p.train_indices]) == {"Normal"}


def test_append_puts_zero_days_last():
    d = rows_dataset(200, 40, 20)
    p = make_split(d, 0.7, {"Worms"}, seed=2, inject_mode="append")
    tail = d.attack_cat[p.test_indices[-20:]]
    assert set(tail) == {"Worms"}
    assert "Worms" not in set(d.attack_cat[p.test_indices[:-20]])


def test_modes_share_test_multiset_and_train():
    d = rows_dataset(300, 50, 15)
    a = make_split(d, 0.7, {"Worms"}, seed=5, inject_mode="shuffled")
    b = make_split(d, 0.7, {"Worms"}, seed=5, inject_mode="append")
    assert np.array_equal(a.train_indices, b.train_indices)
    assert np.array_equal(np.sort(a.test_indices), np.sort(b.test_indices))
    assert not np.array_equal(a.test_indices, b.test_indices)


def test_split_errors():
    d = rows_dataset(10, 5, 2)
    with pytest.raises(SplitError):
        make_split(d, 0.7, {"Shellcode"}, seed=0)
    with pytest.raises(ValueError):
        make_split(d, 1.0, {"Worms"}, seed=0)
    with pytest.raises(ValueError):
        make_split(d, 0.7, set(), seed=0)
    with pytest.raises(SplitError, match="held-out"):
        make_split(rows_dataset(1, 1, 1), 0.7, {"Worms"}, seed=0)


def test_materialize_extracts_rows():
    d = make_dataset([10.0, 20.0, 30.0], ["Normal", "DoS", "Normal"])
    p = SplitPlan(np.array([0, 2]), np.array([1]), frozenset({"DoS"}), 0.7, 0)
    tr, te = materialize(d, p)
    assert tr.features[:, 0].tolist() == [10.0, 30.0]
    assert te.features[:, 0].tolist() == [20.0]
    assert tr.feature_names == te.feature_names
    tr2, te2 = materialize(d, p)
    assert tr.equals(tr2) and te.equals(te2)
    with pytest.raises(IndexError):
        materialize(d, SplitPlan(np.array([0]), np.array([3]), frozenset(), 0.7, 0))


def test_plan_json_round_trip_and_determinism(small_synth):
    zd = select_zero_day_categories(category_counts(small_synth), 4)
    p = make_split(small_synth, 0.7, zd, seed=11)
    assert SplitPlan.from_json(p.to_json()).same_as(p)
    assert make_split(small_synth, 0.7, zd, seed=11).same_as(p)
    assert not make_split(small_synth, 0.7, zd, seed=12).same_as(p)


def test_shuffled_positions_pass_runs_test(small_synth):
    zd = select_zero_day_categories(category_counts(small_synth), 4)
    passed = 0
    for seed in range(20):
        p = make_split(small_synth, 0.7, zd, seed=seed)
        mask = zero_day_mask(small_synth.take(p.test_indices), zd)
        passed += runs_test_pvalue(mask) > 0.01
    assert passed >= 18


def test_append_positions_fail_runs_test(small_synth):
    zd = select_zero_day_categories(category_counts(small_synth), 4)
    p = make_split(small_synth, 0.7, zd, seed=0, inject_mode="append")
    mask = zero_day_mask(small_synth.take(p.test_indices), zd)
    assert runs_test_pvalue(mask) < 1e-6


def test_half_set_shaped_split_sizes_and_zero_day_share():
    """Label-only stand-in for the selected half set (no feature values needed)."""
    cats = np.repeat(list(HALF_SET_COUNTS), list(HALF_SET_COUNTS.values())).astype(object)
    d = Dataset(np.zeros((cats.size, 1)), ("x",), (cats != "Normal").astype(np.int8), cats)
    zd = select_zero_day_categories(category_counts(d), 4)
    p = make_split(d, 0.7, zd, seed=0)
    # 0.7 of 1,325,038 normal rows plus 0.7 of the 72,315 known-attack rows
    assert p.train_indices.size == 978_147
    n_zd = 1134 + 904 + 547 + 64
    share = n_zd / p.test_indices.size
    assert round(100 * share, 2) == 0.63


@settings(max_examples=30, deadline=None)
@given(
    st.integers(20, 200), st.integers(2, 40), st.integers(1, 15),
    st.floats(0.1, 0.9), st.integers(0, 2**63), st.sampled_from(["shuffled", "append"]),
)
def test_split_invariants(n_normal, n_attack, n_zd, frac, seed, mode):
    d = rows_dataset(n_normal, n_attack, n_zd)
    p = make_split(d, frac, {"Worms"}, seed, mode)
    tr, te = set(p.train_indices.tolist()), set(p.test_indices.tolist())
    assert not tr & te
    assert tr | te == set(range(d.n_rows))
    assert len(te) == p.test_indices.size
    assert "Worms" not in set(d.attack_cat[p.train_indices])
    non_zd_test = p.test_indices.size - n_zd
    # rounding is per label stratum, so allow one row per stratum
    assert abs(len(tr) - frac * (len(tr) + non_zd_test)) <= 2
