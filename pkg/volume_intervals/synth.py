"""Seeded synthetic data with known statistical properties.

Used as ground truth in tests and by the ``synth`` subcommand. Output depends
only on the generator spec, including its seed.
"""
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from . import rng
from .errors import ConfigError
from .ingest import DEFAULT_SESSIONS, MinuteBarSeries, SessionCalendar
from .settings import parse_bool, read_key_values

logger = logging.getLogger(__name__)

KINDS = ("iid-normal", "iid-lognormal", "pareto", "spliced", "fgn", "market-like")
INITIAL_PRICE = 100.0
PRICE_TICK = 0.01


@dataclass(frozen=True)
class GeneratorSpec:
    """What to generate.

    Attributes:
        kind: One of ``KINDS``.
        length: Sample size (ignored by ``market-like``, which uses ``days``).
        seed: Seed; fully determines the output.
        delta: Pareto exponent for ``pareto`` and ``spliced``.
        x_min: Pareto lower bound; the splice point for ``spliced``.
        tail_fraction: Share of ``spliced`` samples drawn from the Pareto tail.
        body_rate: Rate of the exponential body of ``spliced``, truncated to ``(0, x_min]``.
        hurst: Hurst exponent of ``fgn`` and of the ``market-like`` volume latent.
        mu: Log-mean of ``iid-lognormal``.
        sigma: Log-standard deviation of ``iid-lognormal`` and of ``market-like`` volumes.
        days: Trading days of ``market-like``.
        sessions: Session calendar of ``market-like``.
        flat_profile: Use a constant intraday profile instead of the U shape.
        profile_depth: Height of the U at the session edges relative to its bottom.
        volume_scale: Average volume per minute at the bottom of the U.
        return_sigma: Standard deviation of one-minute log returns.
        coupling: Exponent linking return magnitude to the volume noise.
        start_date: First trading day.
    """

    kind: str
    length: int = 10_000
    seed: int = 0
    delta: float = 2.5
    x_min: float = 1.0
    tail_fraction: float = 0.3
    body_rate: float = 1.0
    hurst: float = 0.5
    mu: float = 0.0
    sigma: float = 1.0
    days: int = 100
    sessions: Tuple[str, ...] = field(default=DEFAULT_SESSIONS)
    flat_profile: bool = False
    profile_depth: float = 2.0
    volume_scale: float = 1000.0
    return_sigma: float = 5e-4
    coupling: float = 0.5
    start_date: str = "2020-01-02"

    def __post_init__(self) -> None:
        """Checks parameter validity for the kind."""
        if self.kind not in KINDS:
            raise ConfigError(f"generator kind must be one of {KINDS}, got {self.kind!r}")
        if self.length < 1 or self.days < 1:
            raise ConfigError("length and days must be positive")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if not self.delta > 1:
            raise ConfigError(f"delta must exceed 1, got {self.delta}")
        if not self.x_min > 0:
            raise ConfigError(f"x_min must be positive, got {self.x_min}")
        if not 0 < self.hurst < 1:
            raise ConfigError(f"Hurst exponent must lie in (0, 1), got {self.hurst}")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError(f"tail_fraction must lie in (0, 1], got {self.tail_fraction}")
        if not self.body_rate > 0:
            raise ConfigError(f"body_rate must be positive, got {self.body_rate}")
        if self.sigma < 0 or self.return_sigma < 0 or self.profile_depth < 0 or self.volume_scale <= 0:
            raise ConfigError("sigma, return_sigma and profile_depth must be non-negative, volume_scale positive")
        SessionCalendar.parse(self.sessions)


_SPEC_TYPES = {f.name: f.type for f in fields(GeneratorSpec)}


def load_generator_spec(path: Union[str, Path]) -> GeneratorSpec:
    """Reads a generator spec from a ``key = value`` file.

    ``session`` may repeat; every other key is a :class:`GeneratorSpec` field.
    """
    values = {}
    sessions = []
    for key, value in read_key_values(path):
        if key == "session":
            sessions.append(value)
            continue
        if key not in _SPEC_TYPES or key == "sessions":
            raise ConfigError(f"{path}: unknown generator key {key!r}")
        kind = _SPEC_TYPES[key]
        try:
            if kind in (int, "int"):
                values[key] = int(value)
            elif kind in (float, "float"):
                values[key] = float(value)
            elif kind in (bool, "bool"):
                values[key] = parse_bool(value, key)
            else:
                values[key] = value
        except ValueError as e:
            raise ConfigError(f"{path}: invalid value for {key}: {value!r}") from e
    if sessions:
        values["sessions"] = tuple(sessions)
    if "kind" not in values:
        raise ConfigError(f"{path}: generator spec needs a kind")
    return GeneratorSpec(**values)


def pareto_from_uniform(u: np.ndarray, delta: float, x_min: float) -> np.ndarray:
    """Inverse Pareto CDF, ``x = x_min (1 - u)^(-1 / (delta - 1))`` for ``u`` in [0, 1)."""
    if not delta > 1 or not x_min > 0:
        raise ValueError("Pareto draws need delta > 1 and x_min > 0")
    return x_min * (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / (delta - 1.0))


def truncated_exponential(w: np.ndarray, rate: float, upper: float) -> np.ndarray:
    """Inverse CDF of an exponential truncated to ``(0, upper]``, for ``w`` in (0, 1]."""
    mass = -np.expm1(-rate * upper)
    return -np.log1p(-np.asarray(w, dtype=float) * mass) / rate


def fgn(n: int, hurst: float, generator: np.random.Generator) -> np.ndarray:
    """Approximate fractional Gaussian noise by spectral synthesis.

    White noise is shaped in the frequency domain to a power spectrum
    ``f^(1 - 2H)`` on twice the requested length and the first half is kept,
    then standardized. ``H = 0.5`` gives white noise.

    Args:
        n: Length.
        hurst: Hurst exponent in (0, 1).
        generator: Random source.

    Returns:
        Zero-mean, unit-variance series.
    """
    if n < 2:
        raise ValueError("fGn needs at least two points")
    if not 0 < hurst < 1:
        raise ValueError(f"Hurst exponent must lie in (0, 1), got {hurst}")
    m = 2 * n
    freqs = np.fft.rfftfreq(m)
    amplitude = np.zeros_like(freqs)
    amplitude[1:] = freqs[1:] ** (-(2.0 * hurst - 1.0) / 2.0)
    coefficients = amplitude * (generator.standard_normal(freqs.size) + 1j * generator.standard_normal(freqs.size))
    x = np.fft.irfft(coefficients, n=m)[:n]
    return (x - x.mean()) / x.std()


def _market_like(spec: GeneratorSpec, generator: np.random.Generator) -> MinuteBarSeries:
    calendar = SessionCalendar.parse(spec.sessions)
    m = calendar.minutes_per_day
    total = spec.days * m

    if spec.flat_profile:
        shape = np.ones(m)
    else:
        position = (np.arange(m) + 0.5) / m
        shape = 1.0 + spec.profile_depth * (2.0 * position - 1.0) ** 2

    latent = fgn(total, spec.hurst, generator) if total > 1 else np.zeros(total)
    noise = np.exp(spec.sigma * latent - spec.sigma ** 2 / 2.0)
    volume = np.round(spec.volume_scale * np.tile(shape, spec.days) * noise)

    returns = spec.return_sigma * generator.standard_normal(total) * noise ** spec.coupling
    price = np.maximum(np.round(INITIAL_PRICE * np.exp(np.cumsum(returns)), 2), PRICE_TICK)

    days = tuple(pd.bdate_range(spec.start_date, periods=spec.days).date)
    return MinuteBarSeries(days=days, volume=volume.reshape(spec.days, m), price=price.reshape(spec.days, m),
                           calendar=calendar)


def gen(spec: GeneratorSpec) -> Union[np.ndarray, MinuteBarSeries]:
    """Generates the data a spec describes.

    Args:
        spec: Validated generator spec.

    Returns:
        A 1-D array, or a :class:`MinuteBarSeries` for ``market-like``.
    """
    generator = rng.generator(spec.seed, rng.SYNTH_STREAM)
    logger.info("Generating %s data (seed %d)", spec.kind, spec.seed)
    n = spec.length
    if spec.kind == "iid-normal":
        return generator.standard_normal(n)
    if spec.kind == "iid-lognormal":
        return np.exp(spec.mu + spec.sigma * generator.standard_normal(n))
    if spec.kind == "pareto":
        return pareto_from_uniform(generator.random(n), spec.delta, spec.x_min)
    if spec.kind == "spliced":
        in_tail = generator.random(n) < spec.tail_fraction
        u = generator.random(n)
        body = truncated_exponential(1.0 - u, spec.body_rate, spec.x_min)
        return np.where(in_tail, pareto_from_uniform(u, spec.delta, spec.x_min), body)
    if spec.kind == "fgn":
        return fgn(n, spec.hurst, generator)
    return _market_like(spec, generator)
