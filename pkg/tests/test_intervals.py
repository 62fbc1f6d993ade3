import numpy as np
import pytest
from scipy import stats

from conftest import series_of
from volume_intervals import rng
from volume_intervals.errors import EmptyIntervalSeriesError, StatisticsError
from volume_intervals.intervals import (conditional_pdf, extract_intervals, mean_conditional_interval,
                                        scaled_intervals, scaled_pdf)
from volume_intervals.memory import shuffle
from volume_intervals.preprocess import NormalizedSeries
from volume_intervals.synth import fgn


def planted(tau, level=5.0):
    """Series whose exceedances of any q < level are separated by ``tau``."""
    positions = np.concatenate([[0], np.cumsum(tau)])
    v = np.zeros(positions[-1] + 1)
    v[positions] = level
    return series_of(v)


def test_extract_intervals():
    ris = extract_intervals(series_of([0, 3, 0, 0, 3, 3, 0, 3]), 2.0)
    assert ris.tau.tolist() == [3, 1, 2]
    assert ris.start_index.tolist() == [1, 4, 5]
    assert ris.end_index.tolist() == [4, 5, 7]
    assert ris.mean_tau == pytest.approx(2.0)


def test_exceedance_is_strict():
    ris = extract_intervals(series_of([2.0, 2.5, 2.0, 2.5]), 2.0)
    assert ris.tau.tolist() == [2]


def test_too_few_exceedances():
    with pytest.raises(EmptyIntervalSeriesError) as info:
        extract_intervals(series_of([0, 3, 0]), 2.0)
    assert info.value.count == 1
    with pytest.raises(ValueError):
        extract_intervals(series_of([0, 3, 3]), 0.0)


def test_intervals_use_minute_axis():
    v = NormalizedSeries(v=np.array([3.0, 3.0, 3.0]), index=np.array([1, 2, 6]), n_minutes=10,
                         minutes_per_day=5, source="abs-return")
    assert extract_intervals(v, 1.0).tau.tolist() == [1, 4]


def test_interval_sum_and_scaled_mean():
    v = np.abs(np.random.default_rng(3).standard_normal(50_000))
    ris = extract_intervals(series_of(v), 2.0)
    positions = np.flatnonzero(v > 2.0)
    assert ris.tau.sum() == positions[-1] - positions[0]
    assert scaled_intervals(ris).mean() == pytest.approx(1.0)
    assert scaled_pdf(ris).integral() == pytest.approx(1.0)


@pytest.mark.parametrize("p", [0.02, 0.05])
def test_iid_mean_interval(p):
    v = np.abs(np.random.default_rng(4).standard_normal(4_000_000))
    q = stats.norm.isf(p / 2)
    assert extract_intervals(series_of(v), q).mean_tau == pytest.approx(1 / p, rel=0.02)


@pytest.mark.slow
def test_iid_scaled_densities_collapse_onto_exponential():
    v = np.abs(np.random.default_rng(5).standard_normal(8_000_000))
    for p in (0.01, 0.02, 0.05):
        estimate = scaled_pdf(extract_intervals(series_of(v), stats.norm.isf(p / 2)))
        window = (estimate.x >= 0.5) & (estimate.x <= 5)
        lo, hi = estimate.lo[window], estimate.hi[window]
        expected = (np.exp(-lo) - np.exp(-hi)) / (hi - lo)
        assert window.sum() >= 8
        np.testing.assert_allclose(np.log10(estimate.p[window]), np.log10(expected), atol=0.1)


def test_conditional_quartiles_of_alternating_intervals():
    stats_ = conditional_pdf(extract_intervals(planted([1, 10] * 20), 2.0))
    assert len(stats_.bins) == 4
    assert stats_.bin_edges == [(1, 1), (1, 1), (10, 10), (10, 10)]
    assert [b.size for b in stats_.bins] == [10, 10, 10, 10]
    assert set(stats_.bins[0].successors.tolist()) == {10}
    assert set(stats_.bins[3].successors.tolist()) == {1}
    assert stats_.bins[0].successors.size + stats_.bins[1].successors.size == 20
    assert not any(b.empty for b in stats_.bins)


def test_conditional_needs_eight_intervals():
    with pytest.raises(StatisticsError):
        conditional_pdf(extract_intervals(planted([1, 2, 3, 4]), 2.0))


def test_conditional_of_shuffled_intervals():
    pvalues = []
    for seed in range(20):
        v = np.exp(fgn(2 ** 17, 0.9, rng.generator(seed, rng.SYNTH_STREAM)))
        tau = extract_intervals(series_of(v / v.std()), 2.0).tau
        shuffled = extract_intervals(planted(shuffle(tau, seed)), 2.0)
        cond = conditional_pdf(shuffled)
        smallest, largest = cond.bins[0].successors, cond.bins[-1].successors
        pvalues.append(stats.ks_2samp(smallest, largest).pvalue)
    assert np.count_nonzero(np.array(pvalues) > 0.01) >= 18


def test_mean_conditional_of_alternating_intervals():
    points = mean_conditional_interval(extract_intervals(planted([1, 10] * 20), 2.0))
    assert len(points) == 2
    assert points[0].x == pytest.approx(1 / 5.5)
    assert points[0].y == pytest.approx(10 / 5.5)
    assert points[0].n == 20
    assert points[1].x == pytest.approx(10 / 5.5)
    assert points[1].y == pytest.approx(1 / 5.5)
    assert points[1].n == 19
    assert points[0].se == 0.0


def test_mean_conditional_of_equal_intervals():
    points = mean_conditional_interval(extract_intervals(planted([3] * 10), 2.0), binning="linear")
    assert [(p.x, p.y) for p in points] == [(1.0, 1.0)]
