import numpy as np
import pytest

from volume_intervals.errors import DegenerateProfileError, ZeroVarianceError
from volume_intervals.ingest import ReturnSeries
from volume_intervals.preprocess import (IntradayProfile, NormalizedSeries, deseasonalize, intraday_profile, normalize,
                                         normalize_returns, normalize_volumes)
from volume_intervals.synth import GeneratorSpec, gen


def test_profile_is_cross_day_mean():
    grid = np.array([[1.0, 2.0, 3.0], [3.0, 4.0, 5.0]])
    profile = intraday_profile(grid)
    np.testing.assert_allclose(profile.a, [2.0, 3.0, 4.0])
    np.testing.assert_allclose(deseasonalize(grid, profile), [[0.5, 2 / 3, 0.75], [1.5, 4 / 3, 1.25]])


def test_single_day_deseasonalizes_to_ones():
    grid = np.array([[5.0, 1.0, 7.0]])
    assert np.all(deseasonalize(grid, intraday_profile(grid)) == 1.0)


def test_dead_minute_is_degenerate():
    grid = np.array([[1.0, 0.0, 3.0], [2.0, 0.0, 1.0]])
    with pytest.raises(DegenerateProfileError) as info:
        intraday_profile(grid)
    assert info.value.minutes == [1]
    with pytest.raises(DegenerateProfileError):
        IntradayProfile(np.array([1.0, -1.0]))


def test_profile_width_mismatch():
    profile = IntradayProfile(np.ones(3))
    with pytest.raises(ValueError):
        deseasonalize(np.ones((2, 4)), profile)


def test_normalize_gives_unit_std():
    rng = np.random.default_rng(1)
    grid = rng.lognormal(size=(5, 40))
    v = normalize(grid)
    assert np.std(v.v) == pytest.approx(1.0)
    assert len(v) == 200
    assert v.minutes_per_day == 40
    assert v.index.tolist() == list(range(200))
    assert v.day_boundaries.tolist() == [0, 40, 80, 120, 160]


def test_normalize_constant_series():
    with pytest.raises(ZeroVarianceError):
        normalize(np.full((3, 4), 2.0))


def test_normalize_is_scale_invariant():
    rng = np.random.default_rng(2)
    grid = rng.lognormal(size=(4, 30))
    a = normalize(deseasonalize(grid, intraday_profile(grid)))
    b = normalize(deseasonalize(7.5 * grid, intraday_profile(7.5 * grid)))
    np.testing.assert_allclose(a.v, b.v, rtol=1e-12)


def test_returns_placed_on_minute_axis():
    values = np.array([[0.01, -0.02, 0.03], [0.0, 0.02, -0.01]])
    returns = ReturnSeries(values=values, slots=np.array([1, 2, 4]), minutes_per_day=5)
    r = normalize_returns(returns)
    sigma = np.std(values)
    assert r.source == "abs-return"
    assert r.sigma == pytest.approx(sigma)
    assert r.index.tolist() == [1, 2, 4, 6, 7, 9]
    np.testing.assert_allclose(r.v, np.abs(values.ravel()) / sigma)
    axis = r.on_minute_axis()
    assert axis.size == 10
    assert np.isnan(axis[[0, 3, 5, 8]]).all()


def test_constant_returns_rejected():
    returns = ReturnSeries(values=np.zeros((2, 3)), slots=np.array([1, 2, 4]), minutes_per_day=5)
    with pytest.raises(ZeroVarianceError):
        normalize_returns(returns)


def test_series_rejects_bad_index():
    with pytest.raises(ValueError):
        NormalizedSeries(v=np.ones(3), index=np.array([0, 2, 1]), n_minutes=3, minutes_per_day=3)


def test_flat_profile_recovered_from_market_like_data():
    series = gen(GeneratorSpec(kind="market-like", days=100, flat_profile=True, sigma=0.03, hurst=0.5, seed=11))
    profile, v = normalize_volumes(series)
    np.testing.assert_allclose(profile.a, series.volume.mean(), rtol=0.02)
    assert np.std(v.v) == pytest.approx(1.0)


def test_u_shaped_profile_is_removed(market_series):
    profile, _ = normalize_volumes(market_series)
    m = market_series.minutes_per_day
    assert profile.a[0] > 2 * profile.a[m // 2]
    assert profile.a[-1] > 2 * profile.a[m // 2 - 1]
