"""Recurrence intervals between threshold exceedances and short-memory diagnostics."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .binning import LOG_BIN_RATIO, PdfEstimate, interval_pdf
from .errors import EmptyIntervalSeriesError, StatisticsError
from .preprocess import NormalizedSeries

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RecurrenceIntervalSeries:
    """Intervals between successive exceedances of one threshold.

    Attributes:
        q: Threshold in units of the normalized series.
        tau: Intervals in trading minutes, ``tau[k] >= 1``.
        start_index: Minute-axis index of the exceedance opening interval ``k``.
    """

    q: float
    tau: np.ndarray
    start_index: np.ndarray

    def __post_init__(self) -> None:
        """Validates and freezes the arrays."""
        tau = np.array(self.tau, dtype=np.int64)
        start = np.array(self.start_index, dtype=np.int64)
        if tau.ndim != 1 or tau.shape != start.shape or tau.size == 0:
            raise ValueError("tau and start_index must be equal-length non-empty 1-D arrays")
        if np.any(tau < 1):
            raise ValueError("intervals must be at least one minute")
        if np.any(np.diff(start) <= 0):
            raise ValueError("start_index must be strictly increasing")
        tau.setflags(write=False)
        start.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "start_index", start)

    def __len__(self) -> int:
        """Number of intervals."""
        return self.tau.size

    @property
    def mean_tau(self) -> float:
        """Mean interval ``<tau>``."""
        return float(np.mean(self.tau))

    @property
    def end_index(self) -> np.ndarray:
        """Minute-axis index of the exceedance closing each interval."""
        return self.start_index + self.tau


def extract_intervals(v: NormalizedSeries, q: float) -> RecurrenceIntervalSeries:
    """Finds exceedances ``v[t] > q`` and the intervals between them.

    Intervals are measured on the concatenated minute axis, so they cross
    midday breaks and nights without special handling.

    Args:
        v: Normalized series.
        q: Positive threshold.

    Returns:
        The interval series.

    Raises:
        ValueError: If ``q`` is not positive.
        EmptyIntervalSeriesError: If fewer than two exceedances exist.
    """
    if not q > 0:
        raise ValueError(f"threshold must be positive, got {q}")
    positions = v.index[v.v > q]
    if positions.size < 2:
        raise EmptyIntervalSeriesError(q, int(positions.size))
    return RecurrenceIntervalSeries(q=float(q), tau=np.diff(positions), start_index=positions[:-1])


def scaled_intervals(ris: RecurrenceIntervalSeries) -> np.ndarray:
    """Intervals in units of their mean, ``x = tau / <tau>``."""
    return ris.tau / ris.mean_tau


def scaled_pdf(ris: RecurrenceIntervalSeries, ratio: float = LOG_BIN_RATIO) -> PdfEstimate:
    """Log-binned scaled density ``P_q(tau) <tau>`` against ``tau / <tau>``."""
    return interval_pdf(ris.tau, ris.mean_tau, ratio)


@dataclass(frozen=True, eq=False)
class ConditionalBin:
    """Intervals following a preceding interval in one rank bin.

    Attributes:
        index: Bin number, 0 for the smallest preceding intervals.
        tau0_lo: Smallest preceding interval in the bin.
        tau0_hi: Largest preceding interval in the bin.
        size: Number of intervals ranked into the bin.
        successors: Intervals that immediately follow a bin member.
        pdf: Scaled conditional density, None when the bin is flagged empty.
    """

    index: int
    tau0_lo: int
    tau0_hi: int
    size: int
    successors: np.ndarray
    pdf: Optional[PdfEstimate]

    @property
    def empty(self) -> bool:
        """True when fewer than two successors were available."""
        return self.pdf is None


@dataclass(frozen=True, eq=False)
class ConditionalStats:
    """Conditional densities ``P_q(tau | tau0)`` for rank bins of ``tau0``."""

    q: float
    mean_tau: float
    bins: Tuple[ConditionalBin, ...]

    @property
    def bin_edges(self) -> List[Tuple[int, int]]:
        """``(tau0_lo, tau0_hi)`` of every bin."""
        return [(b.tau0_lo, b.tau0_hi) for b in self.bins]


def _rank_bins(tau: np.ndarray, n_bins: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bin number of every interval by rank, and the bin sizes."""
    order = np.argsort(tau, kind="stable")
    rank = np.empty(tau.size, dtype=np.int64)
    rank[order] = np.arange(tau.size)
    sizes = np.array([part.size for part in np.array_split(np.arange(tau.size), n_bins)])
    bin_of_rank = np.repeat(np.arange(n_bins), sizes)
    return bin_of_rank[rank], sizes


def conditional_pdf(ris: RecurrenceIntervalSeries, n_bins_tau0: int = 4,
                    ratio: float = LOG_BIN_RATIO) -> ConditionalStats:
    """Conditional PDF of an interval given the preceding one.

    The whole interval sequence is ranked and split into ``n_bins_tau0``
    equal-size bins. Each adjacent pair ``(tau[k], tau[k+1])`` is assigned to the
    bin of ``tau[k]``; the successors in each bin are log-binned in scaled units.

    Args:
        ris: Interval series with at least 8 intervals.
        n_bins_tau0: Number of rank bins (quartiles by default).
        ratio: Log-binning edge ratio.

    Returns:
        Per-bin successor samples and scaled densities. Bins with fewer than two
        successors carry no density and report ``empty``.
    """
    tau = ris.tau
    if tau.size < 8:
        raise StatisticsError(f"conditional PDF needs at least 8 intervals, got {tau.size}")
    if n_bins_tau0 < 2 or n_bins_tau0 > tau.size:
        raise ValueError(f"n_bins_tau0 must be between 2 and {tau.size}, got {n_bins_tau0}")

    bin_of, sizes = _rank_bins(tau, n_bins_tau0)
    predecessor_bin = bin_of[:-1]
    successors_all = tau[1:]
    mean_tau = ris.mean_tau

    bins = []
    for b in range(n_bins_tau0):
        members = tau[bin_of == b]
        successors = successors_all[predecessor_bin == b]
        pdf = interval_pdf(successors, mean_tau, ratio) if successors.size >= 2 else None
        if pdf is None:
            logger.warning("q=%g: tau0 bin %d has %d successor(s), flagged empty", ris.q, b, successors.size)
        bins.append(ConditionalBin(index=b, tau0_lo=int(members.min()), tau0_hi=int(members.max()),
                                   size=int(sizes[b]), successors=successors, pdf=pdf))
    return ConditionalStats(q=ris.q, mean_tau=mean_tau, bins=tuple(bins))


@dataclass(frozen=True)
class MeanConditionalPoint:
    """Scaled mean of the intervals following preceding intervals in one bin.

    Attributes:
        x: Mean preceding interval of the bin over ``<tau>``.
        y: ``<tau | tau0> / <tau>``.
        n: Number of pairs in the bin.
        se: Standard error of ``y`` (0 for single-pair bins).
    """

    x: float
    y: float
    n: int
    se: float


def mean_conditional_interval(ris: RecurrenceIntervalSeries, n_bins_tau0: int = 20,
                              binning: str = "log") -> List[MeanConditionalPoint]:
    """Mean conditional interval ``<tau | tau0>`` against ``tau0``, both over ``<tau>``.

    Args:
        ris: Interval series with at least 2 intervals.
        n_bins_tau0: Number of ``tau0`` bins between the smallest and largest interval.
        binning: ``log`` or ``linear`` bin spacing.

    Returns:
        One point per non-empty bin, ordered by ``x``.
    """
    tau = ris.tau
    if tau.size < 2:
        raise StatisticsError("mean conditional interval needs at least 2 intervals")
    if binning not in ("log", "linear"):
        raise ValueError(f"binning must be 'log' or 'linear', got {binning!r}")
    if n_bins_tau0 < 1:
        raise ValueError("n_bins_tau0 must be positive")

    tau0 = tau[:-1].astype(float)
    following = tau[1:].astype(float)
    mean_tau = ris.mean_tau
    lo, hi = float(tau.min()), float(tau.max())
    if lo == hi:
        bin_of = np.zeros(tau0.size, dtype=np.int64)
        n_bins = 1
    else:
        edges = np.geomspace(lo, hi, n_bins_tau0 + 1) if binning == "log" else np.linspace(lo, hi, n_bins_tau0 + 1)
        bin_of = np.clip(np.searchsorted(edges, tau0, side="right") - 1, 0, n_bins_tau0 - 1)
        n_bins = n_bins_tau0

    points = []
    for b in range(n_bins):
        mask = bin_of == b
        n = int(mask.sum())
        if n == 0:
            continue
        successors = following[mask]
        se = float(np.std(successors, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        points.append(MeanConditionalPoint(x=float(tau0[mask].mean() / mean_tau),
                                           y=float(successors.mean() / mean_tau),
                                           n=n, se=se / mean_tau))
    return points
