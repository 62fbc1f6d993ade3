"""Minute-bar ingestion with an explicit trading-session calendar.

All downstream indexing is in trading-minute event time: each day holds exactly
``minutes_per_day`` slots, and slots of consecutive sessions and days are
concatenated without gaps.
"""
import datetime
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, IngestError, ParseError, ValidationError
from .settings import parse_bool, read_key_values

logger = logging.getLogger(__name__)

DEFAULT_SESSIONS = ("09:30-11:30", "13:00-15:00")
MISSING_POLICIES = ("drop", "fill")

_SESSION_RE = re.compile(r"^\s*(\d{1,2}):(\d{2})\s*-\s*(\d{1,2}):(\d{2})\s*$")


def _minute_of_day(t: datetime.time) -> int:
    return t.hour * 60 + t.minute


@dataclass(frozen=True)
class SessionCalendar:
    """Trading sessions of one day.

    A session ``(open, close)`` owns the one-minute slots labelled
    ``open, open+1, ..., close-1``; bars are labelled by their start minute.
    """

    sessions: Tuple[Tuple[datetime.time, datetime.time], ...]

    def __post_init__(self) -> None:
        """Checks that sessions are non-empty, ordered and non-overlapping."""
        if not self.sessions:
            raise ConfigError("calendar needs at least one session")
        previous_close = -1
        for open_time, close_time in self.sessions:
            start, end = _minute_of_day(open_time), _minute_of_day(close_time)
            if end <= start:
                raise ConfigError(f"session {open_time:%H:%M}-{close_time:%H:%M} closes before it opens")
            if start < previous_close:
                raise ConfigError("sessions must be ordered and non-overlapping")
            previous_close = end

    @classmethod
    def parse(cls, specs: Sequence[str]) -> "SessionCalendar":
        """Builds a calendar from ``HH:MM-HH:MM`` strings."""
        sessions = []
        for spec in specs:
            match = _SESSION_RE.match(spec)
            if not match:
                raise ConfigError(f"session must look like 09:30-11:30, got {spec!r}")
            h1, m1, h2, m2 = (int(g) for g in match.groups())
            try:
                sessions.append((datetime.time(h1, m1), datetime.time(h2, m2)))
            except ValueError as e:
                raise ConfigError(f"invalid session time in {spec!r}: {e}") from e
        return cls(tuple(sessions))

    @property
    def minutes_per_day(self) -> int:
        """Total number of one-minute slots per day."""
        return sum(_minute_of_day(c) - _minute_of_day(o) for o, c in self.sessions)

    @property
    def session_bounds(self) -> Tuple[Tuple[int, int], ...]:
        """Half-open slot ranges ``[start, stop)`` of each session within a day."""
        bounds = []
        start = 0
        for open_time, close_time in self.sessions:
            stop = start + _minute_of_day(close_time) - _minute_of_day(open_time)
            bounds.append((start, stop))
            start = stop
        return tuple(bounds)

    def slot_lookup(self) -> np.ndarray:
        """Array of length 1440 mapping minute-of-day to slot index, -1 outside sessions."""
        lookup = np.full(24 * 60, -1, dtype=np.int64)
        for (open_time, close_time), (start, stop) in zip(self.sessions, self.session_bounds):
            first = _minute_of_day(open_time)
            lookup[first:first + (stop - start)] = np.arange(start, stop)
        return lookup

    def slot_labels(self) -> List[str]:
        """Wall-clock ``HH:MM`` label of every slot."""
        labels = []
        for open_time, close_time in self.sessions:
            for minute in range(_minute_of_day(open_time), _minute_of_day(close_time)):
                labels.append(f"{minute // 60:02d}:{minute % 60:02d}")
        return labels

    def describe(self) -> List[str]:
        """Sessions as ``HH:MM-HH:MM`` strings."""
        return [f"{o:%H:%M}-{c:%H:%M}" for o, c in self.sessions]


@dataclass(frozen=True, eq=False)
class MinuteBarSeries:
    """Per-day, per-minute prices and volumes on a fixed session grid.

    ``volume`` and ``price`` have shape ``(n_days, minutes_per_day)`` and are
    stored read-only.
    """

    days: Tuple[datetime.date, ...]
    volume: np.ndarray
    price: np.ndarray
    calendar: SessionCalendar
    warnings: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        """Validates the grid invariants and freezes the arrays."""
        volume = np.array(self.volume, dtype=float)
        price = np.array(self.price, dtype=float)
        expected = (len(self.days), self.calendar.minutes_per_day)
        if volume.shape != expected or price.shape != expected:
            raise ValidationError(f"grids must have shape {expected}, got volume {volume.shape}, price {price.shape}")
        if not self.days:
            raise ValidationError("series has no trading days")
        if any(b <= a for a, b in zip(self.days[:-1], self.days[1:])):
            raise ValidationError("days must be strictly increasing")
        if not np.all(np.isfinite(volume)) or np.any(volume < 0):
            raise ValidationError("volumes must be finite and non-negative")
        if not np.all(np.isfinite(price)) or np.any(price <= 0):
            raise ValidationError("prices must be finite and strictly positive")
        volume.setflags(write=False)
        price.setflags(write=False)
        object.__setattr__(self, "days", tuple(self.days))
        object.__setattr__(self, "volume", volume)
        object.__setattr__(self, "price", price)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def n_days(self) -> int:
        """Number of trading days."""
        return len(self.days)

    @property
    def minutes_per_day(self) -> int:
        """Slots per day."""
        return self.calendar.minutes_per_day


@dataclass(frozen=True)
class IngestConfig:
    """Column names, formats, calendar and missing-minute policy of an input file."""

    calendar: SessionCalendar = field(default_factory=lambda: SessionCalendar.parse(DEFAULT_SESSIONS))
    delimiter: str = ","
    date_column: str = "date"
    time_column: str = "time"
    price_column: str = "price"
    volume_column: str = "volume"
    date_format: str = "%Y-%m-%d"
    time_format: str = "%H:%M"
    missing_minutes: str = "drop"
    strict: bool = False

    def __post_init__(self) -> None:
        """Validates the policy switch."""
        if self.missing_minutes not in MISSING_POLICIES:
            raise ConfigError(f"missing_minutes must be one of {MISSING_POLICIES}, got {self.missing_minutes!r}")
        if not self.delimiter:
            raise ConfigError("delimiter must not be empty")


_INGEST_KEYS = ("delimiter", "date_column", "time_column", "price_column", "volume_column",
                "date_format", "time_format", "missing_minutes")


def load_ingest_config(path: Union[str, Path]) -> IngestConfig:
    """Reads an ingest config in ``key = value`` format.

    Example::

        delimiter = ,
        session = 09:30-11:30
        session = 13:00-15:00
        missing_minutes = drop

    Args:
        path: Config file.

    Returns:
        The parsed configuration; unspecified keys keep their defaults.

    Raises:
        ConfigError: On unknown keys or invalid values.
    """
    sessions = []
    values = {}
    for key, value in read_key_values(path):
        if key == "session":
            sessions.append(value)
        elif key == "strict":
            values["strict"] = parse_bool(value, key)
        elif key in _INGEST_KEYS:
            if key == "delimiter" and value.lower() in ("tab", "\\t"):
                value = "\t"
            values[key] = value
        else:
            raise ConfigError(f"{path}: unknown ingest key {key!r}")
    if sessions:
        values["calendar"] = SessionCalendar.parse(sessions)
    return IngestConfig(**values)


def _first_line(mask: np.ndarray, lines: np.ndarray) -> int:
    return int(lines[np.flatnonzero(mask)[0]])


def load_minute_bars(path: Union[str, Path], config: Optional[IngestConfig] = None) -> MinuteBarSeries:
    """Parses a delimiter-separated minute-bar file.

    Args:
        path: Input file with a header row naming the configured columns.
        config: Column layout, calendar and policies; defaults to the canonical
            ``date,time,price,volume`` layout on the 09:30-11:30/13:00-15:00 calendar.

    Returns:
        A validated series. Days with missing minutes are dropped (default) or
        forward-filled with zero volume; each such day adds an entry to
        ``MinuteBarSeries.warnings``.

    Raises:
        IngestError: If the file is missing, empty or malformed.
        ParseError: If a row cannot be parsed (carries the line number).
        ValidationError: If a row breaks an invariant, or a day is incomplete in strict mode.
    """
    config = config or IngestConfig()
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"input file not found: {path}")

    logger.info("Loading minute bars from %s", path)
    try:
        frame = pd.read_csv(path, sep=config.delimiter, dtype=str, keep_default_na=False,
                            skipinitialspace=True, skip_blank_lines=False, engine="python")
    except pd.errors.EmptyDataError as e:
        raise IngestError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ParseError(f"malformed row ({e})", int(match.group(1)) if match else 0) from e
    # Blank lines stay in the frame until here so the index maps to file lines.
    blank = frame.fillna("").apply(lambda column: column.str.strip() == "").all(axis=1)
    frame = frame[~blank]
    if frame.empty:
        raise IngestError(f"{path} has a header but no rows")

    columns = (config.date_column, config.time_column, config.price_column, config.volume_column)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {missing}; found {list(frame.columns)}", 1)

    lines = frame.index.to_numpy() + 2
    dates = pd.to_datetime(frame[config.date_column].str.strip(), format=config.date_format, errors="coerce")
    times = pd.to_datetime(frame[config.time_column].str.strip(), format=config.time_format, errors="coerce")
    price = pd.to_numeric(frame[config.price_column].str.strip(), errors="coerce").to_numpy(dtype=float)
    volume = pd.to_numeric(frame[config.volume_column].str.strip(), errors="coerce").to_numpy(dtype=float)

    for name, bad, raw in (
        ("date", dates.isna().to_numpy(), frame[config.date_column]),
        ("time", times.isna().to_numpy(), frame[config.time_column]),
        ("price", ~np.isfinite(price), frame[config.price_column]),
        ("volume", ~np.isfinite(volume), frame[config.volume_column]),
    ):
        if bad.any():
            row = np.flatnonzero(bad)[0]
            raise ParseError(f"cannot parse {name} {raw.iloc[row]!r}", int(lines[row]))

    if np.any(volume < 0):
        row = np.flatnonzero(volume < 0)[0]
        raise ValidationError(f"negative volume {volume[row]:g}", int(lines[row]))
    if np.any(price <= 0):
        row = np.flatnonzero(price <= 0)[0]
        raise ValidationError(f"non-positive price {price[row]:g}", int(lines[row]))

    warnings: List[str] = []
    calendar = config.calendar
    minutes = (times.dt.hour * 60 + times.dt.minute).to_numpy()
    slots = calendar.slot_lookup()[minutes]
    outside = slots < 0
    if outside.any():
        if config.strict:
            raise ValidationError("row outside the declared trading sessions", _first_line(outside, lines))
        message = f"skipped {int(outside.sum())} row(s) outside sessions {calendar.describe()}"
        logger.warning(message)
        warnings.append(message)
        keep = ~outside
        dates, slots, price, volume, lines = dates[keep], slots[keep], price[keep], volume[keep], lines[keep]
        if len(slots) == 0:
            raise ValidationError("no rows fall inside the declared trading sessions")

    day_keys = dates.dt.normalize().to_numpy()
    unique_days, day_index = np.unique(day_keys, return_inverse=True)
    m = calendar.minutes_per_day

    cell = day_index.astype(np.int64) * m + slots
    repeated = pd.Series(cell).duplicated(keep="first").to_numpy()
    if repeated.any():
        raise ValidationError("duplicate minute within a day", _first_line(repeated, lines))

    price_grid = np.full((len(unique_days), m), np.nan)
    volume_grid = np.full((len(unique_days), m), np.nan)
    price_grid[day_index, slots] = price
    volume_grid[day_index, slots] = volume
    counts = np.bincount(day_index, minlength=len(unique_days))

    kept = []
    for i, day in enumerate(unique_days):
        label = pd.Timestamp(day).date().isoformat()
        if counts[i] == m:
            kept.append(i)
            continue
        if config.strict:
            raise ValidationError(f"day {label} has {counts[i]} of {m} minutes")
        if config.missing_minutes == "drop":
            message = f"dropped day {label}: {m - counts[i]} of {m} minutes missing"
        else:
            holes = np.isnan(price_grid[i])
            price_grid[i] = pd.Series(price_grid[i]).ffill().bfill().to_numpy()
            volume_grid[i, holes] = 0.0
            kept.append(i)
            message = f"filled {int(holes.sum())} missing minute(s) on day {label} with zero volume"
        logger.warning(message)
        warnings.append(message)

    if not kept:
        raise ValidationError("no complete trading day in input")

    days = tuple(pd.Timestamp(unique_days[i]).date() for i in kept)
    logger.info("Loaded %d trading days of %d minutes from %s", len(days), m, path.name)
    return MinuteBarSeries(days=days, volume=volume_grid[kept], price=price_grid[kept],
                           calendar=calendar, warnings=tuple(warnings))


def write_minute_bars(series: MinuteBarSeries, path: Union[str, Path], delimiter: str = ",") -> None:
    """Writes a series in the canonical ``date,time,price,volume`` format.

    Floats are written with round-trip precision, so reloading with the same
    calendar reproduces the series exactly.

    Args:
        series: Series to write.
        path: Destination file.
        delimiter: Field separator.
    """
    labels = series.calendar.slot_labels()
    frame = pd.DataFrame({
        "date": np.repeat([d.isoformat() for d in series.days], series.minutes_per_day),
        "time": np.tile(labels, series.n_days),
        "price": series.price.ravel(),
        "volume": series.volume.ravel(),
    })
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep=delimiter, index=False)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Within-session log returns.

    ``values[d, j]`` is the return ending on slot ``slots[j]`` of day ``d``. The
    first slot of every session has no return.
    """

    values: np.ndarray
    slots: np.ndarray
    minutes_per_day: int

    @property
    def n_days(self) -> int:
        """Number of trading days."""
        return self.values.shape[0]

    def aligned(self) -> np.ndarray:
        """Returns on the full ``(n_days, minutes_per_day)`` grid, NaN at session opens."""
        grid = np.full((self.n_days, self.minutes_per_day), np.nan)
        grid[:, self.slots] = self.values
        return grid


def to_returns(series: MinuteBarSeries) -> ReturnSeries:
    """Computes ``r(t) = ln p(t) - ln p(t-1)`` within each session.

    No return spans the midday break or the overnight gap, so each day yields
    ``minutes_per_day - n_sessions`` returns.

    Args:
        series: Minute bars.

    Returns:
        The return series with slot alignment.

    Raises:
        ValidationError: If any price is not strictly positive.
    """
    price = np.asarray(series.price, dtype=float)
    if np.any(price <= 0):
        raise ValidationError("log returns need strictly positive prices")
    log_price = np.log(price)

    blocks = []
    slots = []
    for start, stop in series.calendar.session_bounds:
        blocks.append(log_price[:, start + 1:stop] - log_price[:, start:stop - 1])
        slots.append(np.arange(start + 1, stop))
    values = np.concatenate(blocks, axis=1)
    values.setflags(write=False)
    return ReturnSeries(values=values, slots=np.concatenate(slots), minutes_per_day=series.minutes_per_day)
