"""Logarithmically binned probability densities."""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

LOG_BIN_RATIO = 10 ** 0.1


@dataclass(frozen=True, eq=False)
class PdfEstimate:
    """Binned density estimate; bins without samples are omitted.

    Attributes:
        x: Bin centers (geometric).
        p: Density per unit of ``x``.
        n: Sample count per bin.
        lo: Lower bin edges.
        hi: Upper bin edges.
        ratio: Nominal ratio between consecutive bin edges.
        n_samples: Sample size the densities are normalized by.
    """

    x: np.ndarray
    p: np.ndarray
    n: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    ratio: float
    n_samples: int

    def __len__(self) -> int:
        """Number of non-empty bins."""
        return self.x.size

    @property
    def points(self) -> List[Tuple[float, float, int]]:
        """``(x, p, n)`` triples."""
        return [(float(x), float(p), int(n)) for x, p, n in zip(self.x, self.p, self.n)]

    def integral(self) -> float:
        """Sum of density times bin width."""
        return float(np.sum(self.p * (self.hi - self.lo)))


def _geometric_edges(start: float, stop: float, ratio: float) -> np.ndarray:
    n_bins = int(np.ceil(np.log(stop / start) / np.log(ratio))) + 1
    return start * ratio ** np.arange(n_bins + 1)


def _estimate(counts: np.ndarray, lo: np.ndarray, hi: np.ndarray, centers: np.ndarray,
              n_samples: int, ratio: float) -> PdfEstimate:
    keep = counts > 0
    width = hi - lo
    density = counts / (n_samples * width)
    return PdfEstimate(x=centers[keep], p=density[keep], n=counts[keep].astype(np.int64),
                       lo=lo[keep], hi=hi[keep], ratio=ratio, n_samples=n_samples)


def log_binned_pdf(x: np.ndarray, ratio: float = LOG_BIN_RATIO) -> PdfEstimate:
    """Density of continuous positive samples on geometric bins.

    Bins start at the smallest sample and grow by ``ratio``.

    Args:
        x: Positive samples.
        ratio: Edge ratio, ``10**(1/10)`` by default.

    Returns:
        The density estimate; it integrates to one.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0 or np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("log binning needs a non-empty sample of positive finite values")
    if ratio <= 1:
        raise ValueError("bin ratio must exceed 1")
    edges = _geometric_edges(x.min(), x.max() * ratio if x.max() == x.min() else x.max(), ratio)
    counts, _ = np.histogram(x, bins=edges)
    lo, hi = edges[:-1], edges[1:]
    return _estimate(counts, lo, hi, np.sqrt(lo * hi), x.size, ratio)


def interval_pdf(tau: np.ndarray, mean_tau: Optional[float] = None, ratio: float = LOG_BIN_RATIO) -> PdfEstimate:
    """Scaled density of integer intervals on geometric bins of whole intervals.

    Bin edges are rounded up to integers so that every bin holds at least one
    possible interval value, and the density divides by the number of integers
    in the bin. The result is expressed in scaled units ``x = tau / <tau>`` with
    density ``P(tau) <tau>``.

    Args:
        tau: Positive integer intervals.
        mean_tau: Scale; defaults to the sample mean.
        ratio: Nominal edge ratio.

    Returns:
        The scaled density estimate; it integrates to one.
    """
    tau = np.asarray(tau)
    if tau.size == 0 or np.any(tau < 1):
        raise ValueError("interval densities need a non-empty sample of positive intervals")
    if ratio <= 1:
        raise ValueError("bin ratio must exceed 1")
    scale = float(np.mean(tau)) if mean_tau is None else float(mean_tau)
    top = int(tau.max()) + 1
    edges = np.unique(np.ceil(_geometric_edges(1.0, float(top), ratio) - 1e-9).astype(np.int64))
    edges = edges[edges <= top]
    if edges[-1] < top:
        edges = np.append(edges, top)
    counts, _ = np.histogram(tau, bins=edges)
    first, stop = edges[:-1].astype(float), edges[1:].astype(float)
    centers = np.sqrt(first * (stop - 1.0)) / scale
    estimate = _estimate(counts, (first - 0.5) / scale, (stop - 0.5) / scale, centers, tau.size, ratio)
    return estimate
