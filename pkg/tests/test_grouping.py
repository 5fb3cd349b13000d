import numpy as np
import pytest

from sparsegof.grouping import (
    GroupedCounts,
    count_occupancy,
    make_equal_cells,
    read_sample,
    transform_sample,
)


def test_make_equal_cells_boundaries():
    assert make_equal_cells(1).boundaries.tolist() == [0.0, 1.0]
    assert make_equal_cells(2).boundaries.tolist() == [0.0, 0.5, 1.0]
    assert make_equal_cells(4).boundaries.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_make_equal_cells_rejects_zero():
    with pytest.raises(ValueError):
        make_equal_cells(0)


def test_transform_sample_examples():
    assert transform_sample([0.3], lambda x: x).tolist() == [0.3]
    assert transform_sample([0.0, 1.0], lambda x: x).tolist() == [0.0, 1.0]
    assert transform_sample([0.5], lambda x: x**2).tolist() == [0.25]


def test_transform_sample_reports_bad_index():
    with pytest.raises(ValueError, match="index 1"):
        transform_sample([0.5, 2.0], lambda x: x)


def test_count_occupancy_examples():
    part = make_equal_cells(2)
    assert count_occupancy([0.1, 0.6, 0.9], part).counts.tolist() == [1, 2]
    assert count_occupancy([0.5], part).counts.tolist() == [0, 1]
    empty = count_occupancy([], make_equal_cells(3))
    assert empty.counts.tolist() == [0, 0, 0]
    assert empty.n == 0 and empty.degenerate


def test_count_occupancy_right_endpoint_goes_to_last_cell():
    assert count_occupancy([1.0], make_equal_cells(4)).counts.tolist() == [0, 0, 0, 1]


def test_count_occupancy_rejects_out_of_range_with_index():
    with pytest.raises(ValueError, match="index 2"):
        count_occupancy([0.1, 0.2, -0.1], make_equal_cells(2))


def test_grouped_counts_invariants():
    g = GroupedCounts(np.array([3, 1, 2, 2]), 8)
    assert g.N == 4 and g.lam == 2.0
    from fractions import Fraction

    assert g.lam_exact == Fraction(2)
    with pytest.raises(ValueError):
        GroupedCounts(np.array([1, 1]), 3)
    with pytest.raises(ValueError):
        GroupedCounts(np.array([-1, 2]), 1)


def test_uniform_counts_have_expected_mean():
    rng = np.random.default_rng(12345)
    n, N, reps = 40, 8, 10_000
    part = make_equal_cells(N)
    totals = np.zeros(N)
    for _ in range(reps):
        totals += count_occupancy(rng.random(n), part).counts
    mean = totals / reps
    sd = np.sqrt(n / N * (1 - 1 / N) / reps)
    assert np.all(np.abs(mean - n / N) < 4 * sd)


def test_read_sample(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("0.1\n\n0.75\n1\n")
    assert read_sample(f).tolist() == [0.1, 0.75, 1.0]
    f.write_text("0.1\nabc\n")
    with pytest.raises(ValueError, match=":2:"):
        read_sample(f)
