"""Shared fixtures: small hand-written bar files and a seeded market-like dataset."""
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from volume_intervals.ingest import MinuteBarSeries, write_minute_bars
from volume_intervals.preprocess import NormalizedSeries
from volume_intervals.synth import gen, load_generator_spec

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    """Directory of checked-in fixture files."""
    return FIXTURES


@pytest.fixture
def write_text(tmp_path: Path) -> Callable[[str, str], Path]:
    """Writes a text file into the test's temporary directory."""
    def _write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture(scope="session")
def market_series() -> MinuteBarSeries:
    """The bundled market-like dataset."""
    return gen(load_generator_spec(FIXTURES / "market_like.cfg"))


@pytest.fixture(scope="session")
def market_csv(tmp_path_factory: pytest.TempPathFactory, market_series: MinuteBarSeries) -> Path:
    """The market-like dataset written as canonical CSV."""
    path = tmp_path_factory.mktemp("market") / "market.csv"
    write_minute_bars(market_series, path)
    return path


def series_of(values: np.ndarray) -> NormalizedSeries:
    """Wraps raw values as a normalized series on a plain minute axis."""
    return NormalizedSeries.from_values(np.asarray(values, dtype=float))
