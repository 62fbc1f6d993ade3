"""Intraday pattern removal and variance normalization.

Volumes are divided by their cross-day average at the same minute of the
session, then by the population standard deviation of the concatenated
series. Returns are only divided by their standard deviation.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateProfileError, StatisticsError, ZeroVarianceError
from .ingest import MinuteBarSeries, ReturnSeries

logger = logging.getLogger(__name__)

SOURCES = ("volume", "abs-return")


@dataclass(frozen=True, eq=False)
class IntradayProfile:
    """Average value at each minute of the session, ``a[s] > 0``."""

    a: np.ndarray

    def __post_init__(self) -> None:
        """Freezes the array and checks positivity."""
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("profile must be a non-empty 1-D array")
        if np.any(a <= 0):
            raise DegenerateProfileError(np.flatnonzero(a <= 0).tolist())
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    def __len__(self) -> int:
        """Minutes per day."""
        return self.a.size


@dataclass(frozen=True, eq=False)
class NormalizedSeries:
    """Event-magnitude series on the concatenated trading-minute axis.

    Attributes:
        v: Non-negative dimensionless values.
        index: Position of each value on the minute axis (strictly increasing).
            Volumes cover every minute; absolute returns skip session opens.
        n_minutes: Length of the minute axis (days times minutes per day).
        minutes_per_day: Slots per trading day.
        source: ``volume`` or ``abs-return``.
        sigma: Standard deviation the raw series was divided by.
    """

    v: np.ndarray
    index: np.ndarray
    n_minutes: int
    minutes_per_day: int
    source: str = "volume"
    sigma: float = 1.0

    def __post_init__(self) -> None:
        """Validates alignment and freezes the arrays."""
        v = np.array(self.v, dtype=float)
        index = np.array(self.index, dtype=np.int64)
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if v.ndim != 1 or v.shape != index.shape:
            raise ValueError("values and index must be 1-D arrays of equal length")
        if index.size and (index[0] < 0 or index[-1] >= self.n_minutes or np.any(np.diff(index) <= 0)):
            raise ValueError("index must be strictly increasing within the minute axis")
        if np.any(v < 0):
            raise ValueError("normalized magnitudes must be non-negative")
        v.setflags(write=False)
        index.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "index", index)

    @classmethod
    def from_values(cls, values: np.ndarray, source: str = "volume", minutes_per_day: Optional[int] = None) -> "NormalizedSeries":
        """Wraps an already normalized series covering every minute of its axis."""
        values = np.asarray(values, dtype=float)
        return cls(v=values, index=np.arange(values.size), n_minutes=values.size,
                   minutes_per_day=minutes_per_day or values.size, source=source)

    def __len__(self) -> int:
        """Number of values."""
        return self.v.size

    @property
    def day_boundaries(self) -> np.ndarray:
        """Minute-axis index where each day starts."""
        return np.arange(0, self.n_minutes, self.minutes_per_day)

    def on_minute_axis(self) -> np.ndarray:
        """Values expanded to the full minute axis, NaN where no value exists."""
        full = np.full(self.n_minutes, np.nan)
        full[self.index] = self.v
        return full

    def with_values(self, values: np.ndarray) -> "NormalizedSeries":
        """Copy carrying different values at the same positions."""
        return NormalizedSeries(v=values, index=self.index, n_minutes=self.n_minutes,
                                minutes_per_day=self.minutes_per_day, source=self.source, sigma=self.sigma)


def _as_grid(series: np.ndarray) -> np.ndarray:
    grid = np.asarray(series, dtype=float)
    if grid.ndim == 1:
        grid = grid[np.newaxis, :]
    if grid.ndim != 2:
        raise ValueError(f"expected a (days, minutes) grid, got shape {grid.shape}")
    return grid


def intraday_profile(series: np.ndarray) -> IntradayProfile:
    """Cross-day average ``a[s] = sum_i V_i(s) / N``.

    Args:
        series: Grid of shape ``(n_days, minutes_per_day)``.

    Returns:
        The profile.

    Raises:
        DegenerateProfileError: If some minute averages to zero.
    """
    grid = _as_grid(series)
    if grid.shape[0] < 1:
        raise StatisticsError("intraday profile needs at least one complete day")
    a = grid.sum(axis=0) / grid.shape[0]
    dead = np.flatnonzero(a <= 0)
    if dead.size:
        raise DegenerateProfileError(dead.tolist())
    return IntradayProfile(a)


def deseasonalize(series: np.ndarray, profile: IntradayProfile) -> np.ndarray:
    """Divides every day by the profile: ``V'_i(s) = V_i(s) / a[s]``.

    Args:
        series: Grid of shape ``(n_days, minutes_per_day)``.
        profile: Profile of matching length.

    Returns:
        Deseasonalized grid.

    Raises:
        ValueError: If the grid width and the profile length differ.
    """
    grid = _as_grid(series)
    if grid.shape[1] != len(profile):
        raise ValueError(f"grid has {grid.shape[1]} minutes per day but profile has {len(profile)}")
    return grid / profile.a


def normalize(grid: np.ndarray, source: str = "volume") -> NormalizedSeries:
    """Concatenates the days and divides by the population standard deviation.

    Args:
        grid: Deseasonalized grid ``(n_days, minutes_per_day)``; a 1-D array is one day.
        source: Tag stored on the result.

    Returns:
        Series with unit standard deviation.

    Raises:
        ZeroVarianceError: If all values are equal.
    """
    grid = _as_grid(grid)
    flat = grid.ravel()
    if flat.size < 2 or np.ptp(flat) == 0:
        raise ZeroVarianceError("cannot normalize a constant series")
    sigma = float(np.std(flat))
    return NormalizedSeries(v=flat / sigma, index=np.arange(flat.size), n_minutes=flat.size,
                            minutes_per_day=grid.shape[1], source=source, sigma=sigma)


def normalize_returns(returns: ReturnSeries) -> NormalizedSeries:
    """Absolute returns in units of the return standard deviation.

    No intraday pattern is removed from returns.

    Args:
        returns: Within-session returns.

    Returns:
        ``|r(t)| / sigma_r`` placed at the minute each return ends on.

    Raises:
        ZeroVarianceError: If every return is equal (e.g. all zero).
    """
    values = np.asarray(returns.values, dtype=float)
    flat = values.ravel()
    if flat.size < 2 or np.ptp(flat) == 0:
        raise ZeroVarianceError("cannot normalize a constant return series")
    sigma = float(np.std(flat))
    m = returns.minutes_per_day
    index = (np.arange(returns.n_days)[:, np.newaxis] * m + returns.slots[np.newaxis, :]).ravel()
    return NormalizedSeries(v=np.abs(flat) / sigma, index=index, n_minutes=returns.n_days * m,
                            minutes_per_day=m, source="abs-return", sigma=sigma)


def normalize_volumes(series: MinuteBarSeries) -> Tuple[IntradayProfile, NormalizedSeries]:
    """Profile, deseasonalize and normalize the volumes of a minute-bar series."""
    profile = intraday_profile(series.volume)
    normalized = normalize(deseasonalize(series.volume, profile), source="volume")
    logger.info("Normalized %d volume minutes (raw sigma after deseasonalizing %.4g)", len(normalized), normalized.sigma)
    return profile, normalized
