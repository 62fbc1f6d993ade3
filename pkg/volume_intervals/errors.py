"""Exception hierarchy shared by the analysis pipeline.

Every error carries the process exit code the CLI reports for it:
1 for configuration, 2 for ingest, 3 for statistics and 4 for output I/O.
"""
from typing import Optional, Sequence


class AnalysisError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 3


class ConfigError(AnalysisError):
    """Invalid run, ingest or generator configuration."""

    exit_code = 1


class IngestError(AnalysisError):
    """Input data could not be turned into a minute-bar series."""

    exit_code = 2


class ParseError(IngestError):
    """A row of the input file could not be parsed."""

    def __init__(self, message: str, line: int) -> None:
        """Initializes the error.

        Args:
            message: What was wrong with the row.
            line: 1-based line number in the input file (the header is line 1).
        """
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.detail = message

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments."""
        return (self.__class__, (self.detail, self.line))


class ValidationError(IngestError):
    """Parsed data violates a series invariant."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        """Initializes the error.

        Args:
            message: The violated invariant.
            line: 1-based line number of the offending row, if known.
        """
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
        self.detail = message

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments."""
        return (self.__class__, (self.detail, self.line))


class StatisticsError(AnalysisError):
    """A statistic is undefined for the given data."""

    exit_code = 3


class DegenerateProfileError(StatisticsError):
    """The intraday profile is zero at one or more minutes."""

    def __init__(self, minutes: Sequence[int]) -> None:
        """Initializes the error.

        Args:
            minutes: Minute-of-session indices where the profile is zero.
        """
        minutes = list(minutes)
        super().__init__(f"intraday profile is zero at minutes {minutes[:10]}"
                         f"{' ...' if len(minutes) > 10 else ''}; exclude dead minutes first")
        self.minutes = minutes

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments."""
        return (self.__class__, (self.minutes,))


class ZeroVarianceError(StatisticsError):
    """Normalization of a constant series."""


class EmptyIntervalSeriesError(StatisticsError):
    """Fewer than two exceedances, so no interval exists."""

    def __init__(self, q: float, count: int) -> None:
        """Initializes the error.

        Args:
            q: The threshold.
            count: Number of exceedances found.
        """
        super().__init__(f"threshold q={q:g} yields {count} exceedance(s); need at least 2")
        self.q = q
        self.count = count

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments."""
        return (self.__class__, (self.q, self.count))


class DivergentMleError(StatisticsError):
    """Every tail sample sits at x_min, so the exponent estimate diverges."""


class NoFeasibleCandidateError(StatisticsError):
    """No x_min candidate keeps enough tail samples."""


class InsufficientLengthError(StatisticsError):
    """Series too short for the requested DFA scales."""

    def __init__(self, length: int, max_scale: int) -> None:
        """Initializes the error.

        Args:
            length: Series length.
            max_scale: Largest scale the series supports.
        """
        super().__init__(f"series of length {length} supports scales up to {max_scale}")
        self.length = length
        self.max_scale = max_scale

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments."""
        return (self.__class__, (self.length, self.max_scale))


class UndefinedCorrelationError(StatisticsError):
    """One margin of a correlation has zero variance or too few pairs."""


class NoTriggerError(StatisticsError):
    """No return exceeds the trace trigger."""

    def __init__(self, trigger: float, max_observed: float) -> None:
        """Initializes the error.

        Args:
            trigger: The requested trigger level.
            max_observed: Largest usable return magnitude in the data.
        """
        super().__init__(f"no return exceeds trigger {trigger:g} (max observed {max_observed:g})")
        self.trigger = trigger
        self.max_observed = max_observed

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments."""
        return (self.__class__, (self.trigger, self.max_observed))


class OutputError(AnalysisError):
    """Writing report artifacts failed."""

    exit_code = 4


class StageError(AnalysisError):
    """Failure of one pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: Exception) -> None:
        """Initializes the error.

        Args:
            stage: Name of the failing stage.
            cause: The underlying exception.
        """
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", StatisticsError.exit_code)

    def __reduce__(self) -> tuple:
        """Pickles with the constructor arguments so the error crosses process boundaries."""
        return (self.__class__, (self.stage, self.cause))
