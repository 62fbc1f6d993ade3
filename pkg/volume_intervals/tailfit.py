"""Power-law tail fitting of pooled scaled intervals.

The lower bound ``x_min`` is chosen by minimizing the Kolmogorov-Smirnov
distance between the tail sample and its maximum-likelihood Pareto fit.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DivergentMleError, EmptyIntervalSeriesError, NoFeasibleCandidateError, StatisticsError
from .intervals import extract_intervals, scaled_intervals
from .parallel import chunk_ranges, parallel_map
from .preprocess import NormalizedSeries

logger = logging.getLogger(__name__)

DEFAULT_N_TAIL_FLOOR = 50
# KS distances within this many 1/sqrt(n_tail) of the minimum count as tied.
DEFAULT_KS_TOLERANCE = 1.36


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted tail ``f(x) = c x^(-delta)`` for ``x >= x_min``.

    Attributes:
        x_min: Lower bound of the power-law region.
        delta: Exponent, greater than 1.
        delta_se: Standard error ``(delta - 1) / sqrt(n_tail)``.
        c: Amplitude including the tail mass, so the curve overlays the density
            of the whole sample.
        c_pareto: Amplitude of a Pareto density normalized on ``[x_min, inf)``.
        ks: Kolmogorov-Smirnov distance of the tail to the fit.
        n_tail: Samples at or above ``x_min``.
        n_total: Size of the whole sample.
    """

    x_min: float
    delta: float
    delta_se: float
    c: float
    c_pareto: float
    ks: float
    n_tail: int
    n_total: int

    def __post_init__(self) -> None:
        """Checks the fit invariants."""
        if not self.delta > 1:
            raise StatisticsError(f"power-law exponent must exceed 1, got {self.delta}")
        if not 0 <= self.ks <= 1:
            raise StatisticsError(f"KS distance must lie in [0, 1], got {self.ks}")
        if self.n_tail < 1 or self.n_total < self.n_tail:
            raise StatisticsError("tail size must be between 1 and the sample size")

    @property
    def p_tail(self) -> float:
        """Fraction of the sample in the tail."""
        return self.n_tail / self.n_total

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """Pareto CDF of the tail."""
        return pareto_cdf(x, self.x_min, self.delta)


def pareto_cdf(x: np.ndarray, x_min: float, delta: float) -> np.ndarray:
    """``F_PL(x) = 1 - (x / x_min)^(1 - delta)`` for ``x >= x_min``."""
    x = np.asarray(x, dtype=float)
    return 1.0 - (x / x_min) ** (1.0 - delta)


def fit_curve(fit: PowerLawFit, x: np.ndarray) -> np.ndarray:
    """Evaluates ``c x^(-delta)`` for overlays on the scaled density."""
    return fit.c * np.asarray(x, dtype=float) ** (-fit.delta)


def pooled_scaled_sample(series: NormalizedSeries, q_list: Sequence[float]) -> np.ndarray:
    """Concatenates the scaled intervals of several thresholds.

    Each threshold's intervals are divided by their own mean before pooling.

    Args:
        series: Normalized series.
        q_list: Thresholds.

    Returns:
        The pooled scaled sample, in ``q_list`` order.

    Raises:
        EmptyIntervalSeriesError: Naming the first threshold without intervals.
    """
    if not len(q_list):
        raise ValueError("q_list must not be empty")
    parts = []
    for q in q_list:
        try:
            ris = extract_intervals(series, q)
        except EmptyIntervalSeriesError as e:
            logger.error("Threshold q=%g cannot be pooled: %s", q, e)
            raise
        parts.append(scaled_intervals(ris))
    return np.concatenate(parts)


def _tail(x: np.ndarray, x_min: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[x >= x_min]


def mle_delta(x: np.ndarray, x_min: float) -> Tuple[float, float]:
    """Continuous Pareto maximum-likelihood exponent.

    ``delta = 1 + n / sum(ln(x_i / x_min))`` over the ``n`` samples at or above
    ``x_min``; the standard error is ``(delta - 1) / sqrt(n)``.

    Args:
        x: Sample.
        x_min: Lower bound.

    Returns:
        ``(delta, delta_se)``.

    Raises:
        StatisticsError: With fewer than two tail samples.
        DivergentMleError: If every tail sample equals ``x_min``.
    """
    if not x_min > 0:
        raise ValueError(f"x_min must be positive, got {x_min}")
    tail = _tail(x, x_min)
    n = tail.size
    if n < 2:
        raise StatisticsError(f"need at least 2 samples >= x_min={x_min:g}, got {n}")
    log_sum = float(np.log(tail / x_min).sum())
    if log_sum <= 0:
        raise DivergentMleError(f"all {n} tail samples equal x_min={x_min:g}")
    delta = 1.0 + n / log_sum
    return delta, (delta - 1.0) / np.sqrt(n)


def ecdf_gaps(x: np.ndarray, x_min: float, delta: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fitted CDF and empirical CDF limits at each distinct tail value.

    Args:
        x: Sample; only values at or above ``x_min`` are used.
        x_min: Lower bound.
        delta: Exponent.

    Returns:
        ``(F_PL, F_left, F_right)`` at the distinct tail values, where
        ``F_left`` and ``F_right`` are the empirical CDF just below and at the value.
    """
    tail = _tail(x, x_min)
    if tail.size == 0:
        raise StatisticsError(f"no samples at or above x_min={x_min:g}")
    values, counts = np.unique(tail, return_counts=True)
    right = np.cumsum(counts) / tail.size
    left = right - counts / tail.size
    return pareto_cdf(values, x_min, delta), left, right


def ks_distance(x: np.ndarray, x_min: float, delta: float) -> float:
    """Largest gap between the tail's empirical CDF and the Pareto CDF.

    Both one-sided limits of the empirical step function are compared at
    every sample point.
    """
    fitted, left, right = ecdf_gaps(x, x_min, delta)
    return float(max(np.max(np.abs(right - fitted)), np.max(np.abs(left - fitted))))


def _make_fit(x_min: float, delta: float, delta_se: float, ks: float, n_tail: int, n_total: int) -> PowerLawFit:
    c_pareto = (delta - 1.0) * x_min ** (delta - 1.0)
    return PowerLawFit(x_min=float(x_min), delta=float(delta), delta_se=float(delta_se),
                       c=float(n_tail / n_total * c_pareto), c_pareto=float(c_pareto),
                       ks=min(1.0, float(ks)), n_tail=int(n_tail), n_total=int(n_total))


def fit_tail_fixed(x: np.ndarray, x_min: float) -> PowerLawFit:
    """Fits the exponent at a given lower bound.

    Args:
        x: Sample.
        x_min: Lower bound held fixed.

    Returns:
        The fit at ``x_min``.
    """
    x = np.asarray(x, dtype=float)
    delta, delta_se = mle_delta(x, x_min)
    n_tail = int(np.count_nonzero(x >= x_min))
    return _make_fit(x_min, delta, delta_se, ks_distance(x, x_min, delta), n_tail, x.size)


def _scan_candidates(task: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    """KS distance and exponent for each candidate start position of a sorted sample.

    Returns an array of shape ``(len(positions), 2)`` holding ``(ks, delta)``;
    ``ks`` is infinite where the MLE diverges.
    """
    log_xs, first, last, positions = task
    out = np.empty((positions.size, 2))
    for row, i in enumerate(positions):
        log_ratio = log_xs[i:] - log_xs[i]
        n_t = log_ratio.size
        log_sum = log_ratio.sum()
        if log_sum <= 0:
            out[row] = (np.inf, np.nan)
            continue
        delta = 1.0 + n_t / log_sum
        fitted = -np.expm1((1.0 - delta) * log_ratio)
        right = (last[i:] - i) / n_t
        left = (first[i:] - i) / n_t
        out[row] = (max(np.max(np.abs(right - fitted)), np.max(np.abs(left - fitted))), delta)
    return out


def fit_tail(x: np.ndarray, x_min_floor: float, n_tail_floor: int = DEFAULT_N_TAIL_FLOOR,
             workers: int = 1, ks_tolerance: float = DEFAULT_KS_TOLERANCE) -> PowerLawFit:
    """Fits a power-law tail with KS-minimizing lower bound.

    Every distinct sample value from ``x_min_floor`` up to the value that still
    leaves ``n_tail_floor`` tail samples is tried as ``x_min``; for each the
    exponent is the MLE and the KS distance is computed. The smallest candidate
    whose distance is within ``ks_tolerance / sqrt(n_tail)`` of the minimum wins:
    on a pure power law the distance only fluctuates at that scale above the true
    lower bound, while below a bend it grows with the tail size. A tolerance of
    zero selects the plain minimum, ties going to the smaller ``x_min``.

    Args:
        x: Positive sample (e.g. pooled scaled intervals).
        x_min_floor: Smallest admissible ``x_min``.
        n_tail_floor: Minimum tail size.
        workers: Processes for the candidate scan.
        ks_tolerance: Width of the tie band in units of ``1 / sqrt(n_tail)``.

    Returns:
        The best fit.

    Raises:
        NoFeasibleCandidateError: If no candidate keeps ``n_tail_floor`` samples.
    """
    xs = np.sort(np.asarray(x, dtype=float))
    if xs.size == 0 or xs[0] <= 0:
        raise ValueError("tail fitting needs a non-empty positive sample")
    if ks_tolerance < 0:
        raise ValueError(f"ks_tolerance must be non-negative, got {ks_tolerance}")
    n = xs.size

    values, first_of_value, counts = np.unique(xs, return_index=True, return_counts=True)
    first = np.repeat(first_of_value, counts)
    last = first + np.repeat(counts, counts)

    feasible = (values >= x_min_floor) & (n - first_of_value >= n_tail_floor)
    positions = first_of_value[feasible]
    if positions.size == 0:
        raise NoFeasibleCandidateError(
            f"no x_min >= {x_min_floor:g} leaves {n_tail_floor} of {n} samples in the tail")

    logger.info("Scanning %d x_min candidates over %d samples", positions.size, n)
    log_xs = np.log(xs)
    tasks = [(log_xs, first, last, positions[r.start:r.stop]) for r in chunk_ranges(positions.size, max(1, workers))]
    scanned = np.concatenate(parallel_map(_scan_candidates, tasks, workers))

    ks = scanned[:, 0]
    if not np.any(np.isfinite(ks)):
        raise NoFeasibleCandidateError("maximum likelihood diverges at every candidate x_min")
    band = ks.min() + ks_tolerance / np.sqrt(n - positions)
    best = int(np.flatnonzero(ks <= band)[0])
    i = int(positions[best])
    delta = float(scanned[best, 1])
    n_tail = n - i
    fit = _make_fit(xs[i], delta, (delta - 1.0) / np.sqrt(n_tail), ks[best], n_tail, n)
    logger.info("Best fit: x_min=%.4g delta=%.4f(%.4f) KS=%.4g n_tail=%d", fit.x_min, fit.delta,
                fit.delta_se, fit.ks, fit.n_tail)
    return fit


def candidate_table(x: np.ndarray, x_min_floor: float,
                    n_tail_floor: int = DEFAULT_N_TAIL_FLOOR) -> List[Tuple[float, float, float]]:
    """``(x_min, delta, ks)`` for every feasible candidate, for diagnostics output."""
    xs = np.sort(np.asarray(x, dtype=float))
    values, first_of_value, counts = np.unique(xs, return_index=True, return_counts=True)
    first = np.repeat(first_of_value, counts)
    last = first + np.repeat(counts, counts)
    positions = first_of_value[(values >= x_min_floor) & (xs.size - first_of_value >= n_tail_floor)]
    scanned = _scan_candidates((np.log(xs), first, last, positions))
    return [(float(xs[i]), float(d), float(k)) for i, (k, d) in zip(positions, scanned)]
