"""Dependence of volume recurrence intervals on price-return magnitudes."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import NoTriggerError, StatisticsError, UndefinedCorrelationError
from .intervals import RecurrenceIntervalSeries, extract_intervals
from .preprocess import NormalizedSeries

logger = logging.getLogger(__name__)

MIN_PAIRS = 30
CORRELATION_METHODS = ("pearson", "spearman")
DEFAULT_Q_POINTS = 40


def _axis_values(r: NormalizedSeries, positions: np.ndarray) -> np.ndarray:
    if positions.size and positions.max() >= r.n_minutes:
        raise ValueError(f"interval positions reach minute {positions.max()} but returns cover {r.n_minutes}")
    return r.on_minute_axis()[positions]


def correlation_pairs(ris: RecurrenceIntervalSeries, r: NormalizedSeries) -> Tuple[np.ndarray, np.ndarray]:
    """``(|r(t_k)|, tau_k)`` for every interval whose opening minute has a return."""
    magnitude = _axis_values(r, ris.start_index)
    keep = ~np.isnan(magnitude)
    return magnitude[keep], ris.tau[keep].astype(float)


def interval_return_correlation(ris: RecurrenceIntervalSeries, r: NormalizedSeries, method: str = "pearson") -> float:
    """Correlation between the return magnitude opening each interval and the interval.

    Args:
        ris: Volume recurrence intervals.
        r: Absolute returns on the same minute axis.
        method: ``pearson``, or ``spearman`` for a rank-based check.

    Returns:
        The correlation coefficient.

    Raises:
        UndefinedCorrelationError: With fewer than 30 pairs or a constant margin.
    """
    if method not in CORRELATION_METHODS:
        raise ValueError(f"method must be one of {CORRELATION_METHODS}, got {method!r}")
    magnitude, tau = correlation_pairs(ris, r)
    if magnitude.size < MIN_PAIRS:
        raise UndefinedCorrelationError(f"q={ris.q:g}: {magnitude.size} return-interval pairs, need {MIN_PAIRS}")
    if np.ptp(magnitude) == 0 or np.ptp(tau) == 0:
        raise UndefinedCorrelationError(f"q={ris.q:g}: returns or intervals have zero variance")
    if method == "pearson":
        value = stats.pearsonr(magnitude, tau)[0]
    else:
        value = stats.spearmanr(magnitude, tau)[0]
    return float(np.clip(value, -1.0, 1.0))


@dataclass(frozen=True)
class ComovementPoint:
    """Share of intervals with large returns at both ends.

    Attributes:
        Q: Return threshold.
        p: ``n_kept / n_total``.
        n_kept: Intervals whose endpoints both have ``|r| > Q``.
        n_total: Intervals whose endpoints both have a return.
    """

    Q: float
    p: float
    n_kept: int
    n_total: int


def _endpoint_minimum(ris: RecurrenceIntervalSeries, r: NormalizedSeries) -> Tuple[np.ndarray, int]:
    axis = r.on_minute_axis()
    if ris.end_index.max() >= r.n_minutes:
        raise ValueError("interval endpoints fall outside the return axis")
    start, end = axis[ris.start_index], axis[ris.end_index]
    available = ~(np.isnan(start) | np.isnan(end))
    return np.minimum(start[available], end[available]), int(available.sum())


def comovement_probability(v: NormalizedSeries, r: NormalizedSeries, q: float,
                           Q_grid: Sequence[float]) -> List[ComovementPoint]:
    """``P(tau | |r| > Q)`` for every return threshold of a grid.

    An interval counts for ``Q`` when the returns at both of its endpoint minutes
    exceed ``Q``. Endpoints at a session open have no return, so those intervals
    are left out of numerator and denominator alike. ``Q <= 0`` imposes no
    condition, giving ``P = 1``.

    Args:
        v: Normalized volumes.
        r: Absolute returns on the same minute axis.
        q: Volume threshold.
        Q_grid: Non-negative return thresholds.

    Returns:
        One point per grid value, in grid order.

    Raises:
        StatisticsError: If no interval has returns at both ends.
    """
    ris = extract_intervals(v, q)
    lowest, n_total = _endpoint_minimum(ris, r)
    if n_total == 0:
        raise StatisticsError(f"q={q:g}: no interval has returns at both endpoints")
    points = []
    for Q in Q_grid:
        if Q < 0:
            raise ValueError(f"return thresholds must be non-negative, got {Q}")
        n_kept = n_total if Q <= 0 else int(np.count_nonzero(lowest > Q))
        points.append(ComovementPoint(Q=float(Q), p=n_kept / n_total, n_kept=n_kept, n_total=n_total))
    return points


def default_q_grid(r: NormalizedSeries, n_points: int = DEFAULT_Q_POINTS) -> Tuple[float, ...]:
    """Zero followed by log-spaced thresholds from 0.1 to the 99.99th percentile of ``|r|``."""
    top = float(np.percentile(r.v, 99.99)) if len(r) else 0.0
    if top <= 0.1:
        return (0.0,)
    return (0.0,) + tuple(float(Q) for Q in np.geomspace(0.1, top, n_points))


@dataclass(frozen=True, eq=False)
class VolumeTrace:
    """Average volume following large returns.

    Attributes:
        offsets: Minutes after the trigger, ``1 .. horizon``.
        mean: Average of ``v`` at each offset.
        n_events: Trigger events averaged.
        trigger: Return threshold.
        events: Minute-axis positions of the averaged events.
    """

    offsets: np.ndarray
    mean: np.ndarray
    n_events: int
    trigger: float
    events: np.ndarray


def conditioned_volume_trace(v: NormalizedSeries, r: NormalizedSeries, trigger: float, horizon: int,
                             event: Optional[int] = None) -> VolumeTrace:
    """Volume evolution after returns larger than ``trigger``.

    Events are minutes with ``|r| > trigger`` whose following ``horizon`` minutes
    lie on the axis.

    Args:
        v: Normalized volumes.
        r: Absolute returns on the same minute axis.
        trigger: Return threshold.
        horizon: Minutes to follow each event.
        event: Follow only the event with this ordinal instead of averaging.

    Returns:
        The trace.

    Raises:
        NoTriggerError: If no usable event exists.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    volume = v.on_minute_axis()
    events = r.index[(r.v > trigger) & (r.index + horizon < v.n_minutes)]
    if events.size == 0:
        raise NoTriggerError(trigger, float(r.v.max()) if len(r) else 0.0)
    if event is not None:
        if not 0 <= event < events.size:
            raise ValueError(f"event {event} out of range, {events.size} trigger events found")
        events = events[event:event + 1]
    offsets = np.arange(1, horizon + 1)
    windows = volume[events[:, np.newaxis] + offsets[np.newaxis, :]]
    logger.info("Averaging volume over %d events with |r| > %g", events.size, trigger)
    return VolumeTrace(offsets=offsets, mean=np.nanmean(windows, axis=0), n_events=int(events.size),
                       trigger=float(trigger), events=events)


@dataclass(frozen=True)
class CouplingReport:
    """Return dependence of one threshold's volume intervals.

    Attributes:
        q: Volume threshold.
        c_r_tau: Interval-return correlation, None when undefined.
        n_pairs: Pairs behind the correlation.
        method: Correlation method.
        comovement: ``P(tau | |r| > Q)`` curve.
        n_tau: Intervals with returns at both endpoints.
        n_tau_raw: All intervals of the threshold.
        trace: Conditioned volume trace, if requested.
    """

    q: float
    c_r_tau: Optional[float]
    n_pairs: int
    method: str
    comovement: Tuple[ComovementPoint, ...]
    n_tau: int
    n_tau_raw: int
    trace: Optional[VolumeTrace] = None


def coupling_report(v: NormalizedSeries, r: NormalizedSeries, q: float, Q_grid: Optional[Sequence[float]] = None,
                    method: str = "pearson", trigger: Optional[float] = None, horizon: int = 240) -> CouplingReport:
    """Correlation, comovement curve and optional trace for one threshold.

    An undefined correlation is logged and reported as None rather than raised.
    """
    ris = extract_intervals(v, q)
    magnitude, _ = correlation_pairs(ris, r)
    try:
        c = interval_return_correlation(ris, r, method)
    except UndefinedCorrelationError as e:
        logger.warning("Correlation undefined: %s", e)
        c = None
    grid = default_q_grid(r) if Q_grid is None else Q_grid
    curve = comovement_probability(v, r, q, grid)
    trace = conditioned_volume_trace(v, r, trigger, horizon) if trigger is not None else None
    return CouplingReport(q=float(q), c_r_tau=c, n_pairs=int(magnitude.size), method=method,
                          comovement=tuple(curve), n_tau=curve[0].n_total if curve else 0,
                          n_tau_raw=len(ris), trace=trace)
