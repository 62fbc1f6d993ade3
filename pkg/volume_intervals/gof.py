"""Goodness of fit of a power-law tail.

KS and weighted KS are judged by a parametric bootstrap from the fitted tail;
the Cramer-von Mises statistic is compared against a fixed critical value.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import rng
from .errors import AnalysisError, StatisticsError
from .parallel import chunk_ranges, parallel_map
from .synth import pareto_from_uniform
from .tailfit import PowerLawFit, ecdf_gaps, fit_tail, ks_distance, mle_delta, pareto_cdf

logger = logging.getLogger(__name__)

CVM_CRITICAL = 0.743
SIGNIFICANCE = 0.01
STATISTICS = ("ks", "ksw")
MIN_USEFUL_N_BOOT = 100


@dataclass(frozen=True)
class GofReport:
    """Goodness-of-fit summary of one tail fit.

    Attributes:
        ks: Observed KS distance.
        ksw: Observed weighted KS distance.
        p_ks: Bootstrap p-value of ``ks``, a multiple of ``1 / n_boot``.
        p_ksw: Bootstrap p-value of ``ksw``.
        w2: Cramer-von Mises statistic.
        n_boot: Number of replicates.
        seed: Master seed of the replicates.
    """

    ks: float
    ksw: float
    p_ks: float
    p_ksw: float
    w2: float
    n_boot: int
    seed: int

    @property
    def decision_ks(self) -> bool:
        """Power law not rejected by KS at the 1% level."""
        return self.p_ks > SIGNIFICANCE

    @property
    def decision_ksw(self) -> bool:
        """Power law not rejected by weighted KS at the 1% level."""
        return self.p_ksw > SIGNIFICANCE

    @property
    def decision_cvm(self) -> bool:
        """``w2`` below the critical value."""
        return cvm_passes(self.w2)


def cvm_passes(w2: float) -> bool:
    """True when ``w2`` is below the 1% critical value 0.743."""
    return w2 < CVM_CRITICAL


def ksw_distance(x: np.ndarray, x_min: float, delta: float) -> float:
    """Weighted KS distance, emphasizing both ends of the distribution.

    Every gap between the empirical step function and the Pareto CDF is divided
    by ``sqrt(F_PL (1 - F_PL))``; points where ``F_PL`` is exactly 0 or 1 are
    skipped.
    """
    fitted, left, right = ecdf_gaps(x, x_min, delta)
    keep = (fitted > 0) & (fitted < 1)
    if not np.any(keep):
        return 0.0
    fitted, left, right = fitted[keep], left[keep], right[keep]
    weight = 1.0 / np.sqrt(fitted * (1.0 - fitted))
    gaps = np.maximum(np.abs(right - fitted), np.abs(left - fitted))
    return float(np.max(gaps * weight))


def cvm_from_probabilities(u: np.ndarray) -> float:
    """``W2 = 1/(12N) + sum_i (u_(i) - (2i - 1)/(2N))^2`` over sorted ``u``."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    if n == 0:
        raise StatisticsError("Cramer-von Mises statistic needs a non-empty sample")
    expected = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    return float(1.0 / (12.0 * n) + np.sum((u - expected) ** 2))


def cvm_statistic(x: np.ndarray, x_min: float, delta: float) -> float:
    """Cramer-von Mises statistic of the tail ``x >= x_min`` against the Pareto CDF."""
    x = np.asarray(x, dtype=float)
    tail = x[x >= x_min]
    return cvm_from_probabilities(pareto_cdf(tail, x_min, delta))


def _replicate_statistics(sim: np.ndarray, x_min: float, delta: float) -> Tuple[float, float]:
    return ks_distance(sim, x_min, delta), ksw_distance(sim, x_min, delta)


def _bootstrap_chunk(task: tuple) -> np.ndarray:
    """KS and KSW of replicates ``lo .. hi - 1``; shape ``(hi - lo, 2)``."""
    fit, seed, lo, hi, body, x_min_floor, n_tail_floor = task
    out = np.empty((hi - lo, 2))
    for row, r in enumerate(range(lo, hi)):
        gen = rng.generator(seed, rng.BOOTSTRAP_STREAM, r)
        try:
            if body is None:
                sim = pareto_from_uniform(gen.random(fit.n_tail), fit.delta, fit.x_min)
                delta, _ = mle_delta(sim, fit.x_min)
                out[row] = _replicate_statistics(sim, fit.x_min, delta)
            else:
                n_tail = gen.binomial(fit.n_total, fit.p_tail) if body.size else fit.n_total
                sim = np.concatenate([pareto_from_uniform(gen.random(n_tail), fit.delta, fit.x_min),
                                      gen.choice(body, size=fit.n_total - n_tail)])
                refit = fit_tail(sim, x_min_floor, n_tail_floor)
                out[row] = _replicate_statistics(sim, refit.x_min, refit.delta)
        except AnalysisError as e:
            # A replicate that cannot be refitted counts as exceeding the observed value.
            logger.debug("Bootstrap replicate %d could not be refitted: %s", r, e)
            out[row] = (np.inf, np.inf)
    return out


def bootstrap_statistics(fit: PowerLawFit, n_boot: int = 1000, seed: int = 0, rescan: bool = False,
                         x: Optional[np.ndarray] = None, x_min_floor: Optional[float] = None,
                         n_tail_floor: int = 50, workers: int = 1) -> np.ndarray:
    """KS and KSW distances of synthetic replicates drawn from a fit.

    By default each replicate holds ``n_tail`` Pareto draws (inverse CDF) and is
    refitted by MLE with ``x_min`` fixed. With ``rescan`` each replicate instead
    has the full sample size, mixing Pareto draws with resampled body values
    below ``x_min``, and is refitted with a full ``x_min`` scan.

    Replicate ``r`` always uses the random stream keyed by ``(seed, r)``, so the
    result does not depend on ``workers``.

    Args:
        fit: Fitted tail.
        n_boot: Number of replicates.
        seed: Master seed.
        rescan: Use the full re-scanning scheme.
        x: Original sample; required with ``rescan``.
        x_min_floor: Scan floor with ``rescan``; defaults to the sample minimum.
        n_tail_floor: Minimum tail size with ``rescan``.
        workers: Processes to spread replicates over.

    Returns:
        Array of shape ``(n_boot, 2)`` holding KS and KSW per replicate.
    """
    if n_boot < 1:
        raise ValueError(f"n_boot must be positive, got {n_boot}")
    body = None
    if rescan:
        if x is None:
            raise ValueError("rescan needs the original sample")
        x = np.asarray(x, dtype=float)
        body = x[x < fit.x_min]
        if x_min_floor is None:
            x_min_floor = float(x.min())
    logger.info("Drawing %d bootstrap replicates (seed %d%s)", n_boot, seed, ", rescanning x_min" if rescan else "")
    tasks = [(fit, seed, r.start, r.stop, body, x_min_floor, n_tail_floor)
             for r in chunk_ranges(n_boot, max(1, workers))]
    return np.concatenate(parallel_map(_bootstrap_chunk, tasks, workers))


def pvalue_from_replicates(simulated: np.ndarray, observed: float) -> float:
    """Fraction of replicate statistics strictly above the observed one."""
    simulated = np.asarray(simulated, dtype=float)
    return int(np.count_nonzero(simulated > observed)) / simulated.size


def bootstrap_pvalue(fit: PowerLawFit, statistic: str = "ks", n_boot: int = 1000, seed: int = 0,
                     observed: Optional[float] = None, x: Optional[np.ndarray] = None,
                     rescan: bool = False, workers: int = 1) -> float:
    """Bootstrap p-value of the KS or KSW distance of a fit.

    Args:
        fit: Fitted tail.
        statistic: ``ks`` or ``ksw``.
        n_boot: Number of replicates; fewer than 100 only earns a warning.
        seed: Master seed.
        observed: Observed statistic. Defaults to ``fit.ks`` for KS, or to the
            statistic of ``x`` when the sample is given.
        x: Original sample.
        rescan: Use the full re-scanning bootstrap.
        workers: Processes to spread replicates over.

    Returns:
        ``#{stat_sim > observed} / n_boot``.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    if n_boot < MIN_USEFUL_N_BOOT:
        logger.warning("n_boot=%d gives p-values in steps of %.3g, too coarse for the 1%% level", n_boot, 1.0 / n_boot)
    if observed is None:
        if x is not None:
            observed = (ks_distance if statistic == "ks" else ksw_distance)(x, fit.x_min, fit.delta)
        elif statistic == "ks":
            observed = fit.ks
        else:
            raise ValueError("the observed KSW distance needs either observed= or the sample x")
    simulated = bootstrap_statistics(fit, n_boot, seed, rescan=rescan, x=x, workers=workers)
    return pvalue_from_replicates(simulated[:, STATISTICS.index(statistic)], observed)


def goodness_of_fit(x: np.ndarray, fit: PowerLawFit, n_boot: int = 1000, seed: int = 0, rescan: bool = False,
                    x_min_floor: Optional[float] = None, n_tail_floor: int = 50, workers: int = 1) -> GofReport:
    """Runs all three tests of a fit on one replicate set.

    Args:
        x: Sample the fit was made on.
        fit: Fitted tail.
        n_boot: Number of replicates.
        seed: Master seed.
        rescan: Use the full re-scanning bootstrap.
        x_min_floor: Scan floor for ``rescan``.
        n_tail_floor: Minimum tail size for ``rescan``.
        workers: Processes to spread replicates over.

    Returns:
        The report.
    """
    if n_boot < MIN_USEFUL_N_BOOT:
        logger.warning("n_boot=%d gives p-values in steps of %.3g, too coarse for the 1%% level", n_boot, 1.0 / n_boot)
    ks = ks_distance(x, fit.x_min, fit.delta)
    ksw = ksw_distance(x, fit.x_min, fit.delta)
    w2 = cvm_statistic(x, fit.x_min, fit.delta)
    simulated = bootstrap_statistics(fit, n_boot, seed, rescan=rescan, x=x, x_min_floor=x_min_floor,
                                     n_tail_floor=n_tail_floor, workers=workers)
    report = GofReport(ks=ks, ksw=ksw, p_ks=pvalue_from_replicates(simulated[:, 0], ks),
                       p_ksw=pvalue_from_replicates(simulated[:, 1], ksw), w2=w2, n_boot=n_boot, seed=seed)
    logger.info("GOF: KS=%.4g p=%.3f, KSW=%.4g p=%.3f, W2=%.4g", report.ks, report.p_ks, report.ksw,
                report.p_ksw, report.w2)
    return report
