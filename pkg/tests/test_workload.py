import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from priorsynth import (
    ConfigError,
    DensityDistribution,
    Histogram,
    MarginalQuery,
    Schema,
    Workload,
    evaluate_marginal,
    normalize,
    validate_partial_workload,
    workload_sensitivity,
)
from priorsynth.workload import materialize


def max_column_sum(schema, workload):
    stacked = np.vstack([materialize(schema, q) for q in workload])
    return int(stacked.sum(axis=0).max())


@pytest.fixture
def dist(ab_schema):
    # (a0,b0)=0, (a0,b1)=1, (a1,b0)=3
    return DensityDistribution(ab_schema, [0, 1, 3], [0.25, 0.25, 0.5])


def test_one_way_marginal(dist):
    np.testing.assert_allclose(evaluate_marginal(dist, MarginalQuery((0,))).values, [0.5, 0.5])


def test_full_marginal_is_identity(dist):
    vals = evaluate_marginal(dist, MarginalQuery((0, 1))).values
    np.testing.assert_allclose(vals, [0.25, 0.25, 0, 0.5, 0, 0])


def test_histogram_marginal_counts(ab_schema):
    h = Histogram.from_dict(ab_schema, {0: 2, 5: 1, 2: 4})
    np.testing.assert_array_equal(evaluate_marginal(h, MarginalQuery((1,))).values, [2, 0, 5])


def test_query_validation(ab_schema):
    with pytest.raises(ConfigError):
        MarginalQuery(())
    with pytest.raises(ConfigError):
        MarginalQuery((0, 0))
    with pytest.raises(ConfigError):
        evaluate_marginal(Histogram.empty(ab_schema), MarginalQuery((2,)))
    with pytest.raises(ConfigError):
        Workload(())
    with pytest.raises(ConfigError):
        Workload((MarginalQuery((0,)), MarginalQuery((0,))))


def test_attrs_are_sorted():
    assert MarginalQuery((2, 0)).attrs == (0, 2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.integers(0, 2**32 - 1), st.data())
def test_mass_conservation_and_normalisation_commute(sizes, seed, data):
    schema = Schema.from_sizes(sizes)
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, schema.size + 1))
    cells = rng.choice(schema.size, size=k, replace=False)
    hist = Histogram(schema, cells, rng.integers(1, 20, size=k))
    attrs = data.draw(st.sets(st.integers(0, len(sizes) - 1), min_size=1))
    query = MarginalQuery(tuple(attrs))
    from_dist = evaluate_marginal(normalize(hist), query).values
    from_hist = evaluate_marginal(hist, query).values
    assert from_dist.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(from_dist, from_hist / hist.total, atol=1e-15)
    # materialised matrix gives the same answer
    dense = np.zeros(schema.size)
    dense[hist.cells.astype(int)] = hist.counts
    np.testing.assert_allclose(materialize(schema, query) @ dense, from_hist)


def test_rows_have_disjoint_support_and_full_coverage():
    schema = Schema.from_sizes([2, 3, 2])
    for r in range(1, 4):
        for attrs in itertools.combinations(range(3), r):
            mat = materialize(schema, MarginalQuery(attrs))
            assert (mat.sum(axis=0) == 1).all()
            assert mat.sum() == schema.size


def test_block_cells_match_matrix_rows():
    schema = Schema.from_sizes([2, 3, 4])
    q = MarginalQuery((0, 2))
    mat = materialize(schema, q)
    for row in range(q.size(schema)):
        np.testing.assert_array_equal(q.block_cells(schema, row), np.flatnonzero(mat[row]))


@pytest.mark.parametrize("workload,expected", [
    ([(0,)], 1),
    ([(0,), (1,), (0, 1)], 3),
    ([(0,), (1,), (2,)], 3),
    ([(0, 1), (2,)], 2),
])
def test_sensitivity_matches_materialised_oracle(workload, expected):
    schema = Schema.from_sizes([2, 3, 2])
    wl = Workload(tuple(MarginalQuery(a) for a in workload))
    assert max_column_sum(schema, wl) == expected
    assert workload_sensitivity(wl) == expected


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=2, max_size=4), st.data())
def test_sensitivity_oracle_random(sizes, data):
    schema = Schema.from_sizes(sizes)
    subsets = [s for r in range(1, len(sizes) + 1) for s in itertools.combinations(range(len(sizes)), r)]
    chosen = data.draw(st.lists(st.sampled_from(subsets), min_size=1, max_size=5, unique=True))
    wl = Workload(tuple(MarginalQuery(s) for s in chosen))
    assert schema.size <= 200
    assert workload_sensitivity(wl) == max_column_sum(schema, wl)


def test_partial_workload_validation():
    assert validate_partial_workload([MarginalQuery((0,))]).ok
    report = validate_partial_workload([MarginalQuery((0,)), MarginalQuery((1,))])
    assert not report.ok and "cover" in report.reason
    assert not validate_partial_workload([])


def test_partial_workload_oracle():
    schema = Schema.from_sizes([2, 3])
    both = np.vstack([materialize(schema, MarginalQuery((0,))), materialize(schema, MarginalQuery((1,)))])
    assert both.sum(axis=0).max() == 2
    assert materialize(schema, MarginalQuery((0,))).sum(axis=0).max() == 1


def test_workload_names_roundtrip(ab_schema):
    wl = Workload.from_names(ab_schema, [["B", "A"], ["B"]])
    assert wl[0].attrs == (0, 1)
    assert wl.to_names(ab_schema) == [["A", "B"], ["B"]]
    with pytest.raises(ConfigError):
        Workload.from_names(ab_schema, [["C"]])
