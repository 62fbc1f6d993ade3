"""Long-term memory via detrended fluctuation analysis, with a shuffled control."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import rng
from .errors import EmptyIntervalSeriesError, InsufficientLengthError, StatisticsError
from .intervals import extract_intervals
from .preprocess import NormalizedSeries

logger = logging.getLogger(__name__)

MIN_SCALE = 4
DEFAULT_N_SCALES = 20
# Relative to the largest profile magnitude; below this a fluctuation counts as zero.
_ZERO_FLUCTUATION = 1e-10


@dataclass(frozen=True, eq=False)
class DfaResult:
    """Fluctuation function and its scaling exponent.

    Attributes:
        scales: Window sizes ``l``.
        F: Fluctuation ``F(l)`` at each scale.
        alpha: Slope of ``ln F`` against ``ln l`` over ``fit_range``; None when some
            fluctuation in the range is zero.
        alpha_se: Standard error of the slope.
        fit_range: Smallest and largest scale used in the fit.
        order: Detrending polynomial order.
    """

    scales: np.ndarray
    F: np.ndarray
    alpha: Optional[float]
    alpha_se: Optional[float]
    fit_range: Tuple[int, int]
    order: int

    @property
    def points(self) -> list:
        """``(l, F)`` pairs."""
        return [(int(s), float(f)) for s, f in zip(self.scales, self.F)]


def default_scales(n: int, n_scales: int = DEFAULT_N_SCALES) -> np.ndarray:
    """Log-spaced integer scales from 4 to ``n // 4``."""
    top = n // 4
    if top < MIN_SCALE:
        raise InsufficientLengthError(n, top)
    return np.unique(np.round(np.geomspace(MIN_SCALE, top, n_scales)).astype(np.int64))


def _fluctuation(profile: np.ndarray, scale: int, order: int) -> float:
    n = profile.size
    n_windows = n // scale
    used = n_windows * scale
    windows = np.concatenate([profile[:used].reshape(n_windows, scale),
                              profile[n - used:].reshape(n_windows, scale)])
    t = (np.arange(scale) - (scale - 1) / 2.0) / scale
    design = np.vander(t, order + 1)
    coef, *_ = np.linalg.lstsq(design, windows.T, rcond=None)
    residual = windows.T - design @ coef
    return float(np.sqrt(np.mean(residual ** 2)))


def dfa(series: np.ndarray, scales: Optional[Sequence[int]] = None, order: int = 1,
        fit_range: Optional[Tuple[int, int]] = None) -> DfaResult:
    """Detrended fluctuation analysis of order ``order``.

    The profile ``Y(k) = sum_{j<=k} (s_j - mean)`` is cut into ``N // l``
    windows from the start and as many from the end. A least-squares polynomial
    is removed from the profile in every window and ``F(l)`` is the root mean
    square of what is left.

    Args:
        series: Input values.
        scales: Window sizes; 20 log-spaced scales from 4 to ``N / 4`` by default.
        order: Polynomial order, at least 1.
        fit_range: Inclusive scale range of the exponent fit; the whole grid by default.

    Returns:
        The fluctuation function and exponent.

    Raises:
        InsufficientLengthError: If the series is shorter than four times the largest scale.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if order < 1:
        raise ValueError(f"order must be at least 1, got {order}")
    scales = default_scales(n) if scales is None else np.unique(np.asarray(scales, dtype=np.int64))
    if scales.size == 0:
        raise ValueError("at least one scale is required")
    if scales[0] < max(MIN_SCALE, order + 2):
        raise ValueError(f"scales must be at least {max(MIN_SCALE, order + 2)} for order {order}, got {scales[0]}")
    if n < 4 * scales[-1]:
        raise InsufficientLengthError(n, n // 4)

    profile = np.cumsum(x - x.mean())
    F = np.array([_fluctuation(profile, int(s), order) for s in scales])

    lo, hi = fit_range if fit_range is not None else (int(scales[0]), int(scales[-1]))
    in_range = (scales >= lo) & (scales <= hi)
    if in_range.sum() < 2:
        raise ValueError(f"fit range {lo}..{hi} covers fewer than two scales")
    alpha = alpha_se = None
    if np.any(F[in_range] <= _ZERO_FLUCTUATION * max(1.0, float(np.abs(profile).max()))):
        logger.warning("Zero fluctuation in the fit range, DFA exponent undefined")
    else:
        fit = stats.linregress(np.log(scales[in_range]), np.log(F[in_range]))
        alpha, alpha_se = float(fit.slope), float(fit.stderr)
    return DfaResult(scales=scales, F=F, alpha=alpha, alpha_se=alpha_se, fit_range=(int(lo), int(hi)), order=order)


def shuffle(series: np.ndarray, seed: int) -> np.ndarray:
    """Uniform random permutation of ``series``, fixed by ``seed``."""
    return rng.generator(seed, rng.SHUFFLE_STREAM).permutation(np.asarray(series))


@dataclass(frozen=True)
class IntervalMemory:
    """DFA of one threshold's intervals, raw and after shuffling the volumes.

    Attributes:
        q: Threshold.
        n_intervals: Intervals of the raw series.
        n_shuffled_intervals: Intervals of the shuffled series.
        raw: DFA of the raw interval sequence.
        shuffled: DFA of the intervals re-extracted from the shuffled series.
    """

    q: float
    n_intervals: int
    n_shuffled_intervals: int
    raw: DfaResult
    shuffled: DfaResult


@dataclass(frozen=True)
class MemoryReport:
    """Exponents of the series itself and of its intervals per threshold."""

    series: DfaResult
    entries: Tuple[IntervalMemory, ...]
    seed: int


def interval_memory_report(v: NormalizedSeries, q_list: Sequence[float], seed: int = 0, min_intervals: int = 200,
                           scales: Optional[Sequence[int]] = None, order: int = 1) -> MemoryReport:
    """Compares interval memory of the series with that of a shuffled copy.

    Shuffling keeps the multiset of values, so each threshold has the same number
    of exceedances before and after; only the ordering (and with it any memory)
    is destroyed.

    Args:
        v: Normalized series.
        q_list: Thresholds.
        seed: Shuffle seed.
        min_intervals: Thresholds with fewer intervals are skipped with a warning.
        scales: DFA scales; by default chosen per sequence length.
        order: DFA order.

    Returns:
        The report, including the DFA of ``v`` itself.

    Raises:
        StatisticsError: If every threshold is skipped.
    """
    logger.info("Running DFA on %d values and their intervals for q=%s", len(v), list(q_list))
    series_dfa = dfa(v.v, scales=None, order=order)
    shuffled_v = v.with_values(shuffle(v.v, seed))

    entries = []
    for q in q_list:
        try:
            raw = extract_intervals(v, q)
            mixed = extract_intervals(shuffled_v, q)
        except EmptyIntervalSeriesError as e:
            logger.warning("Skipping q=%g in memory analysis: %s", q, e)
            continue
        if len(raw) < min_intervals or len(mixed) < min_intervals:
            logger.warning("Skipping q=%g in memory analysis: %d intervals, need %d", q, len(raw), min_intervals)
            continue
        try:
            entries.append(IntervalMemory(q=float(q), n_intervals=len(raw), n_shuffled_intervals=len(mixed),
                                          raw=dfa(raw.tau, scales=scales, order=order),
                                          shuffled=dfa(mixed.tau, scales=scales, order=order)))
        except InsufficientLengthError as e:
            logger.warning("Skipping q=%g in memory analysis: %s", q, e)
    if not entries:
        raise StatisticsError(f"no threshold in {list(q_list)} yields {min_intervals} intervals for DFA")
    return MemoryReport(series=series_dfa, entries=tuple(entries), seed=seed)
