import numpy as np
import pytest

from conftest import series_of
from volume_intervals.coupling import (comovement_probability, conditioned_volume_trace, coupling_report,
                                       default_q_grid, interval_return_correlation)
from volume_intervals.errors import NoTriggerError, StatisticsError, UndefinedCorrelationError
from volume_intervals.intervals import RecurrenceIntervalSeries, extract_intervals
from volume_intervals.preprocess import NormalizedSeries


def returns_on_axis(values, index, n_minutes):
    return NormalizedSeries(v=np.asarray(values, dtype=float), index=np.asarray(index), n_minutes=n_minutes,
                            minutes_per_day=n_minutes, source="abs-return")


def ris_from(tau):
    tau = np.asarray(tau)
    start = np.concatenate([[0], np.cumsum(tau)[:-1]])
    return RecurrenceIntervalSeries(q=2.0, tau=tau, start_index=start)


def magnitudes_at_starts(ris, values, n_minutes):
    r = np.zeros(n_minutes)
    r[ris.start_index] = values
    return series_of(r)


def test_identical_sequences_correlate_perfectly():
    tau = np.random.default_rng(0).integers(1, 20, 100)
    ris = ris_from(tau)
    r = magnitudes_at_starts(ris, tau, int(ris.end_index[-1]) + 1)
    assert interval_return_correlation(ris, r) == pytest.approx(1.0)


def test_affine_anticorrelation():
    tau = np.random.default_rng(1).integers(1, 20, 100)
    ris = ris_from(tau)
    r = magnitudes_at_starts(ris, 30.0 - 1.5 * tau, int(ris.end_index[-1]) + 1)
    assert interval_return_correlation(ris, r) == pytest.approx(-1.0)


def test_correlation_is_scale_invariant():
    gen = np.random.default_rng(2)
    tau = gen.integers(1, 20, 200)
    ris = ris_from(tau)
    values = tau + gen.random(200) * 10
    n = int(ris.end_index[-1]) + 1
    a = interval_return_correlation(ris, magnitudes_at_starts(ris, values, n))
    b = interval_return_correlation(ris, magnitudes_at_starts(ris, 3.0 * values, n))
    assert a == pytest.approx(b, rel=1e-12)
    assert -1.0 <= interval_return_correlation(ris, magnitudes_at_starts(ris, values, n), "spearman") <= 1.0


def test_independent_margins_are_uncorrelated():
    gen = np.random.default_rng(3)
    n = 10_000
    ris = ris_from(gen.geometric(0.1, n))
    r = magnitudes_at_starts(ris, np.abs(gen.standard_normal(n)), int(ris.end_index[-1]) + 1)
    assert abs(interval_return_correlation(ris, r)) < 3 / np.sqrt(n)


def test_undefined_correlation():
    ris = ris_from(np.arange(1, 41))
    n = int(ris.end_index[-1]) + 1
    with pytest.raises(UndefinedCorrelationError):
        interval_return_correlation(ris, magnitudes_at_starts(ris, np.full(40, 2.0), n))
    short = ris_from(np.arange(1, 11))
    with pytest.raises(UndefinedCorrelationError):
        interval_return_correlation(short, magnitudes_at_starts(short, np.arange(10.0), 100))


def test_missing_returns_are_skipped():
    ris = ris_from(np.arange(1, 41))
    n = int(ris.end_index[-1]) + 1
    keep = np.arange(1, 40)
    r = returns_on_axis(ris.tau[keep] * 2.0, ris.start_index[keep], n)
    assert interval_return_correlation(ris, r) == pytest.approx(1.0)


def test_comovement_counts_both_endpoints():
    v = series_of([3, 0, 3, 0, 0, 3, 3])
    r = returns_on_axis([5.0, 1.0, 4.0, 0.5], [0, 2, 5, 6], 7)
    points = comovement_probability(v, r, 2.0, [0.0, 0.8, 2.0, 6.0])
    assert [p.n_total for p in points] == [3, 3, 3, 3]
    assert [p.n_kept for p in points] == [3, 2, 0, 0]
    assert points[0].p == 1.0
    assert points[1].p == pytest.approx(2 / 3)


def test_comovement_skips_endpoints_without_returns():
    v = series_of([3, 0, 3, 0, 3])
    r = returns_on_axis([2.0, 2.0], [0, 2], 5)
    points = comovement_probability(v, r, 2.0, [0.0, 1.0])
    assert points[0].n_total == 1
    assert points[1].p == 1.0
    with pytest.raises(StatisticsError):
        comovement_probability(v, returns_on_axis([2.0], [1], 5), 2.0, [0.0])


def test_comovement_of_independent_series():
    gen = np.random.default_rng(4)
    n = 400_000
    v = series_of(np.abs(gen.standard_normal(n)))
    magnitude = np.abs(gen.standard_normal(n))
    r = series_of(magnitude)
    grid = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
    points = comovement_probability(v, r, 2.0, grid)
    assert points[0].p == 1.0
    assert all(a.p >= b.p for a, b in zip(points[:-1], points[1:]))
    for point in points[1:]:
        m = np.mean(magnitude > point.Q)
        # Adjacent intervals share an endpoint, which inflates the binomial variance by (1 + 3m) / (1 + m).
        se = np.sqrt(m ** 2 * (1 - m) * (1 + 3 * m) / point.n_total)
        assert abs(point.p - m ** 2) < 3 * se + 1e-12
    assert points[0].n_total == len(extract_intervals(v, 2.0))


def test_q_above_every_return_gives_zero():
    v = series_of([3, 0, 3, 3])
    r = series_of([1.0, 1.0, 2.0, 1.5])
    assert comovement_probability(v, r, 2.0, [10.0])[0].p == 0.0


def test_default_q_grid():
    r = series_of(np.abs(np.random.default_rng(5).standard_normal(10_000)))
    grid = default_q_grid(r)
    assert grid[0] == 0.0
    assert len(grid) == 41
    assert grid[1] == pytest.approx(0.1)
    assert grid[-1] == pytest.approx(np.percentile(r.v, 99.99))
    assert default_q_grid(series_of(np.full(10, 0.05))) == (0.0,)


def test_constant_volume_trace():
    v = series_of(np.full(50, 0.7))
    r = series_of(np.where(np.arange(50) % 10 == 0, 6.0, 0.1))
    trace = conditioned_volume_trace(v, r, 5.0, 8)
    np.testing.assert_allclose(trace.mean, 0.7)
    assert trace.offsets.tolist() == list(range(1, 9))
    assert trace.n_events == 5


def test_planted_post_trigger_elevation():
    gen = np.random.default_rng(6)
    n = 200_000
    v = gen.exponential(size=n)
    r = np.abs(gen.standard_normal(n)) * 0.5
    events = np.arange(1000, n - 1000, 2000)
    r[events] = 8.0
    for t in events:
        v[t + 1:t + 121] += 1.0
    trace = conditioned_volume_trace(series_of(v), series_of(r), 5.0, 240)
    assert trace.n_events == events.size
    early, late = trace.mean[:120].mean(), trace.mean[120:].mean()
    assert early - late == pytest.approx(1.0, abs=0.1)
    single = conditioned_volume_trace(series_of(v), series_of(r), 5.0, 240, event=0)
    assert single.n_events == 1
    assert single.events.tolist() == [1000]


def test_no_trigger_reports_largest_return():
    r = series_of([0.5, 1.5, 1.0])
    with pytest.raises(NoTriggerError) as info:
        conditioned_volume_trace(series_of([1.0, 1.0, 1.0]), r, 5.0, 1)
    assert info.value.max_observed == 1.5


def test_coupling_report(market_series):
    from volume_intervals.ingest import to_returns
    from volume_intervals.preprocess import normalize_returns, normalize_volumes

    _, v = normalize_volumes(market_series)
    r = normalize_returns(to_returns(market_series))
    report = coupling_report(v, r, 2.0, trigger=3.0, horizon=30)
    assert report.n_tau_raw == len(extract_intervals(v, 2.0))
    assert report.n_tau <= report.n_tau_raw
    assert report.comovement[0].p == 1.0
    assert -1.0 <= report.c_r_tau <= 1.0
    assert report.trace is None or report.trace.mean.size == 30
