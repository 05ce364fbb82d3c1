from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairhms.dataset import (
    DataError,
    Dataset,
    FairnessSpec,
    InfeasibleSpecError,
    balanced_bounds,
    complete_selection,
    err,
    exact_bounds,
    free_bounds,
    generate_anticorrelated,
    group_counts,
    group_skyline,
    is_independent,
    join_columns,
    load_csv,
    normalize,
    proportional_bounds,
    skyline_mask,
    write_csv,
)


def make(coords, groups, C=None):
    coords = np.asarray(coords, dtype=float)
    C = C or int(max(groups)) + 1
    return Dataset(tuple(f"p{i}" for i in range(len(coords))), coords, np.asarray(groups),
                   tuple(f"g{c}" for c in range(C)))


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def test_load_detects_numeric_columns_and_ids(table1):
    assert table1.columns == ("lsat", "gpa")
    assert table1.ids[0] == "a1" and table1.n == 8
    assert table1.group_names == ("Female", "Male")
    assert list(table1.group_sizes) == [4, 4]
    assert table1.point(4).coords == (170.0, 2.79)


def test_load_explicit_columns_and_single_group(table1_path):
    ds = load_csv(table1_path, numeric_columns=["gpa", "lsat"])
    assert ds.columns == ("gpa", "lsat") and ds.C == 1 and ds.group_names == ("all",)


def test_load_reports_bad_cell_location(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,x,y,g\na,1,2,u\nb,3,oops,v\n")
    with pytest.raises(DataError, match=r"row 3, column 'y'"):
        load_csv(path, numeric_columns=["x", "y"], group_column="g")


@pytest.mark.parametrize("body, pattern", [
    ("id,x,y\n", "no data rows"),
    ("", "empty file"),
    ("id,x,y\na,1\n", "row 2: expected 3 cells"),
    ("id,x,y\na,1,2\na,3,4\n", "duplicate values"),
    ("id,x,name\na,1,q\n", "numeric columns"),
])
def test_load_rejects_malformed_files(tmp_path, body, pattern):
    path = tmp_path / "f.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=pattern):
        load_csv(path)


def test_load_missing_file_and_column(tmp_path, table1_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "nope.csv")
    with pytest.raises(DataError, match="missing column 'age'"):
        load_csv(table1_path, group_column="age")


def test_write_then_load_round_trip(tmp_path):
    ds = generate_anticorrelated(50, 3, 2, seed=4)
    path = tmp_path / "g.csv"
    write_csv(ds, path)
    back = load_csv(path, group_column="group")
    assert back.ids == ds.ids and back.group_names == ds.group_names
    np.testing.assert_array_equal(back.coords, ds.coords)
    np.testing.assert_array_equal(back.groups, ds.groups)


def test_join_columns():
    assert join_columns([["F", "M"], ["x", "y"]]) == ["F+x", "M+y"]


def test_dataset_rejects_bad_input():
    with pytest.raises(DataError):
        make([[1.0], [2.0]], [0, 0])
    with pytest.raises(DataError):
        make([[1.0, np.nan]], [0])
    with pytest.raises(DataError):
        Dataset(("a",), np.ones((1, 2)), np.array([1]), ("g0",))


def test_index_of_and_subset():
    ds = make([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]], [0, 1, 0])
    assert list(ds.index_of(["p2", "p0"])) == [2, 0]
    with pytest.raises(KeyError):
        ds.index_of(["zz"])
    sub = ds.subset([2, 1])
    assert sub.ids == ("p2", "p1") and list(sub.groups) == [0, 1] and sub.C == 2


# ---------------------------------------------------------------------------
# normalization and skylines
# ---------------------------------------------------------------------------


def test_minmax_normalization(table1):
    ds = normalize(table1)
    assert ds.coords.min() == 0.0 and ds.coords.max() == 1.0
    np.testing.assert_allclose(ds.coords[4], [1.0, 0.0])
    np.testing.assert_allclose(ds.coords[0], [(164 - 153) / 17, (3.31 - 2.79) / 1.1])


def test_constant_column_becomes_one():
    ds = normalize(make([[1.0, 5.0], [2.0, 5.0]], [0, 0]))
    np.testing.assert_array_equal(ds.coords[:, 1], [1.0, 1.0])


def test_max_normalization(table1):
    ds = normalize(table1, "max")
    np.testing.assert_allclose(ds.coords[4], [1.0, 2.79 / 3.89])
    with pytest.raises(ValueError):
        normalize(table1, "zscore")


def _brute_skyline(X):
    n = len(X)
    keep = []
    for i in range(n):
        dominated = False
        for j in range(n):
            if j == i:
                continue
            if np.all(X[j] >= X[i]) and (np.any(X[j] > X[i]) or j < i):
                dominated = True
                break
        keep.append(not dominated)
    return np.array(keep)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 40), st.integers(2, 4), st.integers(0, 10**6), st.booleans())
def test_skyline_matches_pairwise_definition(n, d, seed, coarse):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, d)).astype(float) if coarse else rng.random((n, d))
    np.testing.assert_array_equal(skyline_mask(X), _brute_skyline(X))


def test_skyline_is_per_group():
    # p1 dominates p0 but they sit in different groups
    ds = make([[0.2, 0.2], [0.9, 0.9], [0.1, 0.1]], [0, 1, 0])
    assert list(ds.skyline_flags) == [True, True, False]
    assert list(ds.skyline_sizes()) == [1, 1]
    assert group_skyline(ds).ids == ("p0", "p1")


# ---------------------------------------------------------------------------
# fairness bounds and the matroid
# ---------------------------------------------------------------------------


def test_proportional_and_balanced_bounds():
    ds = make(np.random.default_rng(0).random((100, 2)), [0] * 50 + [1] * 30 + [2] * 20)
    spec = proportional_bounds(ds, 10, 0.1)
    assert (spec.lower, spec.upper, spec.kind) == ((4, 2, 1), (6, 4, 3), "prop")
    # (1 - 0.1) * 10 / 3 is exactly 3; float arithmetic would give 2.999...
    spec = balanced_bounds(ds, 10, 0.1)
    assert (spec.lower, spec.upper) == ((3, 3, 3), (4, 4, 4))


def test_bounds_are_clamped(table1):
    spec = proportional_bounds(table1, 3, 0.1)
    assert (spec.lower, spec.upper) == ((1, 1), (2, 2))
    ds = make(np.random.default_rng(1).random((8, 2)), [0, 0, 1, 1, 2, 2, 3, 3])
    spec = balanced_bounds(ds, 8, 0.1)
    assert (spec.lower, spec.upper) == ((1,) * 4, (3,) * 4)
    single = make(np.random.default_rng(1).random((5, 2)), [0] * 5)
    assert proportional_bounds(single, 4, 0.3).lower == (2,)
    assert proportional_bounds(single, 4, 0.3).upper == (4,)
    assert balanced_bounds(ds, 4, 0.01).lower == (1,) * 4 == balanced_bounds(ds, 4, 0.01).upper


def test_clamped_bounds_can_be_infeasible():
    ds = make(np.random.default_rng(1).random((100, 2)), [0] * 98 + [1, 2])
    # the large group wants l=4 but the clamp caps it at k - C + 1 = 3
    with pytest.raises(InfeasibleSpecError):
        proportional_bounds(ds, 5, 0.1)
    with pytest.raises(InfeasibleSpecError):
        proportional_bounds(ds, 2, 0.1)
    with pytest.raises(ValueError):
        balanced_bounds(ds, 6, 1.5)


def test_spec_validation():
    with pytest.raises(InfeasibleSpecError):
        FairnessSpec(3, (2, 2), (3, 3))
    with pytest.raises(InfeasibleSpecError):
        FairnessSpec(5, (0, 0), (2, 2))
    with pytest.raises(InfeasibleSpecError):
        FairnessSpec(2, (2, 0), (1, 2))
    ds = make([[0.1, 0.2], [0.3, 0.4], [0.5, 0.1]], [0, 0, 1])
    with pytest.raises(InfeasibleSpecError, match="has 1 points"):
        exact_bounds(3, (1, 2)).check(ds)
    with pytest.raises(InfeasibleSpecError, match="groups"):
        exact_bounds(2, (1, 1, 0)).check(ds)


def test_independence_matches_definition():
    spec = FairnessSpec(5, (1, 2, 0), (3, 3, 2))
    for counts in itertools.product(range(5), repeat=3):
        expected = all(x <= h for x, h in zip(counts, spec.upper)) and \
            sum(max(x, lo) for x, lo in zip(counts, spec.lower)) <= 5
        assert spec.independent_counts(counts) == expected
        if not expected:
            continue
        add = spec.addable_groups(np.array(counts))
        for c in range(3):
            trial = list(counts)
            trial[c] += 1
            assert add[c] == spec.independent_counts(trial)


def test_err_counts_violations():
    ds = make(np.random.default_rng(2).random((9, 2)), [0, 0, 0, 0, 0, 1, 1, 2, 2])
    spec = FairnessSpec(4, (1, 1, 1), (2, 2, 2))
    assert err([0, 1, 2, 3], ds, spec) == 2 + 1 + 1
    assert err([0, 5, 7, 8], ds, spec) == 0
    assert is_independent([0, 5], ds, spec) and not is_independent([0, 1, 2], ds, spec)
    assert list(group_counts([], ds)) == [0, 0, 0]


def test_free_bounds_accept_everything():
    ds = make(np.random.default_rng(3).random((6, 2)), [0, 0, 0, 0, 1, 1])
    spec = free_bounds(ds, 3)
    assert all(err(S, ds, spec) == 0 for S in itertools.combinations(range(6), 3))


def test_complete_selection_reaches_k_and_stays_fair():
    rng = np.random.default_rng(5)
    ds = make(rng.random((30, 2)), rng.integers(0, 3, 30), C=3)
    spec = proportional_bounds(ds, 8, 0.2)
    S = complete_selection([], ds, spec)
    assert len(S) == 8 and err(S, ds, spec) == 0
    S2 = complete_selection(S[:3], ds, spec)
    assert S2[:3] == S[:3] and len(S2) == 8 and err(S2, ds, spec) == 0
    with pytest.raises(InfeasibleSpecError):
        complete_selection(list(ds.group_members(0)[:9]), ds, spec)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def test_generator_shape_groups_and_determinism():
    a = generate_anticorrelated(1000, 3, 4, seed=7)
    b = generate_anticorrelated(1000, 3, 4, seed=7)
    np.testing.assert_array_equal(a.coords, b.coords)
    assert a.n == 1000 and a.d == 3 and list(a.group_sizes) == [250] * 4
    assert a.coords.min() >= 0.0 and a.coords.max() <= 1.0
    sums = a.coords.sum(axis=1)
    for c in range(3):
        assert sums[a.groups == c].max() <= sums[a.groups == c + 1].min()
    assert not np.array_equal(a.coords, generate_anticorrelated(1000, 3, 4, seed=8).coords)


def test_generator_is_anticorrelated():
    ds = generate_anticorrelated(5000, 2, 1, seed=0)
    assert np.corrcoef(ds.coords.T)[0, 1] < -0.5
    # anti-correlated data has a far larger skyline than independent data
    indep = skyline_mask(np.random.default_rng(0).random((5000, 2))).sum()
    assert ds.skyline_sizes()[0] > 3 * indep


def test_generator_rejects_bad_sizes():
    with pytest.raises(ValueError):
        generate_anticorrelated(2, 2, 3)
    with pytest.raises(ValueError):
        generate_anticorrelated(10, 1, 1)
