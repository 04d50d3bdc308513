import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roa.resample import (Dataset, InverseCdf, ResampleCounts, ceil_size, derive_seed, draw_counts,
                          empirical_quantile, materialize, nested_counts, read_dataset, write_dataset)


def test_derive_seed_deterministic_and_order_sensitive():
    assert derive_seed(7, [1, 2]) == derive_seed(7, [1, 2])
    assert derive_seed(7, [1, 2]) != derive_seed(7, [2, 1])
    assert derive_seed(7, [1]) != derive_seed(7, [1, 0])
    assert derive_seed(7, []) != derive_seed(8, [])


def test_derive_seed_rejects_negative_component():
    with pytest.raises(ValueError):
        derive_seed(0, [1, -1])


def test_derive_seed_no_collisions_over_many_paths():
    g = np.random.default_rng(0)
    paths = set()
    while len(paths) < 100_000:
        k = int(g.integers(1, 7))
        paths.add(tuple(int(v) for v in g.integers(0, 1 << 20, k)))
    seeds = {derive_seed(11, p) for p in paths}
    assert len(seeds) == len(paths)


def test_derive_seed_fits_64_bits():
    for p in itertools.product(range(3), repeat=3):
        assert 0 <= derive_seed(5, p) < 1 << 64


def test_dataset_validation_and_shape():
    d = Dataset.from_values([1.0, 2.0, 3.0], "x")
    assert d.n == 3 and d.width == 1
    with pytest.raises(ValueError):
        Dataset(np.empty((0, 1)))
    with pytest.raises(ValueError):
        d.rows[0, 0] = 5.0


def test_counts_invariants():
    base = Dataset.from_values([1.0, 2.0])
    with pytest.raises(ValueError):
        ResampleCounts([1, -1], base)
    with pytest.raises(ValueError):
        ResampleCounts([0, 0], base)
    with pytest.raises(ValueError):
        ResampleCounts([1, 1, 1], base)
    c = ResampleCounts([3, 1], base)
    assert c.m == 4
    assert c.deviations().sum() == pytest.approx(0.0, abs=1e-15)


def test_draw_counts_examples():
    base4 = Dataset.from_values([1.0, 2.0, 3.0, 4.0])
    for s in range(20):
        assert draw_counts(base4, 4, s).m == 4
    one = Dataset.from_values([9.0])
    assert draw_counts(one, 5, 3).counts.tolist() == [5]
    with pytest.raises(ValueError):
        draw_counts(base4, 0, 1)


def test_draw_counts_mean_count_is_one():
    base = Dataset.from_values(np.arange(10.0))
    total = np.zeros(10)
    for s in range(100_000):
        total += draw_counts(base, 10, s).counts
    assert np.all(np.abs(total / 100_000 - 1.0) < 0.01)


def test_draw_counts_reproducible():
    base = Dataset.from_values(np.arange(30.0))
    a = draw_counts(base, 17, derive_seed(3, [1, 2]))
    b = draw_counts(base, 17, derive_seed(3, [1, 2]))
    assert np.array_equal(a.counts, b.counts)


def test_materialize():
    base = Dataset(np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]]))
    out = materialize(ResampleCounts([2, 0, 1], base))
    assert out.rows.tolist() == [[1.0, 10.0], [1.0, 10.0], [3.0, 30.0]]
    last = materialize(ResampleCounts([0, 0, 4], base))
    assert last.n == 4 and np.all(last.rows[:, 0] == 3.0)
    for s in range(5):
        assert materialize(draw_counts(base, 7, s)).n == 7


def test_nested_counts():
    base = Dataset.from_values([1.0, 2.0, 3.0])
    parent = ResampleCounts([3, 0, 0], base)
    inner = nested_counts(parent, 5, 9)
    assert inner.counts.tolist() == [5, 0, 0]
    assert inner.base is base
    with pytest.raises(ValueError):
        nested_counts(parent, 0, 1)


def test_nested_counts_frequencies_match_parent():
    base = Dataset.from_values(np.arange(4.0))
    parent = ResampleCounts([4, 3, 2, 1], base)
    total = np.zeros(4)
    for s in range(20_000):
        total += nested_counts(parent, 5, s).counts
    freq = total / total.sum()
    assert np.all(np.abs(freq - parent.counts / parent.m) < 0.01)


def test_empirical_quantile():
    assert empirical_quantile(Dataset.from_values([5.0]), 0.3) == 5.0
    assert empirical_quantile(Dataset.from_values([4.0, 2.0, 1.0, 3.0]), 0.6) == 3.0
    assert empirical_quantile(Dataset.from_values([4.0, 2.0, 1.0, 3.0]), 0.0) == 1.0
    assert empirical_quantile(Dataset.from_values([4.0, 2.0, 1.0, 3.0]), 1e-12) == 1.0
    with pytest.raises(ValueError):
        empirical_quantile(Dataset.from_values([1.0]), 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(0.0, 0.999999))
def test_quantile_is_ceil_order_statistic(values, u):
    x = np.sort(np.array(values))
    k = max(1, int(np.ceil(u * x.size - 1e-9)))
    got = empirical_quantile(Dataset.from_values(values), u)
    # floating point at exact multiples of 1/n may pick the neighbour
    assert got in (x[k - 1], x[min(k, x.size - 1)], x[max(k - 2, 0)])
    if abs(u * x.size - round(u * x.size)) > 1e-6:
        assert got == x[k - 1]


def test_weighted_inverse_cdf_uses_counts():
    q = InverseCdf(np.array([3.0, 1.0, 2.0]), np.array([0, 2, 2]))
    assert q(np.array([0.0, 0.49, 0.5, 0.51, 0.99])).tolist() == [1.0, 1.0, 1.0, 2.0, 2.0]


def test_resample_cdf_converges_to_empirical_cdf():
    base = Dataset.from_values(np.random.default_rng(4).normal(size=50))
    pooled = np.concatenate([materialize(draw_counts(base, 50, s)).values for s in range(10_000)])
    grid = np.sort(base.values)
    ecdf_base = np.arange(1, 51) / 50
    ecdf_pool = np.searchsorted(np.sort(pooled), grid, side="right") / pooled.size
    assert np.max(np.abs(ecdf_pool - ecdf_base)) < 0.01


def test_dataset_csv_round_trip(tmp_path):
    d = Dataset(np.array([[1.5, -2.0], [0.1, 3.25]]))
    path = tmp_path / "sample.csv"
    write_dataset(d, path, ["a", "b"])
    back = read_dataset(path)
    assert back.label == "sample"
    assert np.array_equal(back.rows, d.rows)


def test_read_dataset_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ValueError):
        read_dataset(p)
    p.write_text("")
    with pytest.raises(ValueError):
        read_dataset(p)


def test_ceil_size():
    assert ceil_size(0.2, 20) == 4
    assert ceil_size(0.2, 4) == 1
    assert ceil_size(0.04, 4) == 1
    assert ceil_size(0.3, 10) == 3
