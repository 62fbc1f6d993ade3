"""Run configuration: JSON settings file plus key-value text configs."""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import ConfigError
from .parallel import default_workers

logger = logging.getLogger(__name__)

DEFAULT_Q_LIST = (2.0, 3.0, 4.0, 5.0)
DEFAULT_N_BOOT = 1000

# Excluded from the config hash so bundles match across machines and output locations.
_UNHASHED_FIELDS = ("threads", "out_dir")


def read_key_values(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """Reads a ``key = value`` text file.

    Blank lines and lines starting with ``#`` are ignored. Keys may repeat
    (``session`` does), so pairs are returned in file order.

    Args:
        path: File to read.

    Returns:
        List of (key, value) pairs with surrounding whitespace stripped.

    Raises:
        ConfigError: If the file is missing or a line has no ``=``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"could not read config file {path}: {e}") from e

    pairs = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip().lower(), value.strip()))
    return pairs


def parse_bool(value: str, key: str) -> bool:
    """Parses ``true``/``false`` style flags."""
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {value!r}")


def parse_float_list(value: Union[str, List[Any], Tuple[Any, ...]], key: str) -> Tuple[float, ...]:
    """Parses ``2,3,4,5`` or a JSON list into a tuple of floats."""
    items = value.split(",") if isinstance(value, str) else list(value)
    try:
        return tuple(float(item) for item in items if str(item).strip() != "")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: expected a list of numbers, got {value!r}") from e


@dataclass(frozen=True)
class InstrumentInput:
    """One input file and the instrument id it is reported under."""

    path: str
    instrument: str


@dataclass(frozen=True)
class RunConfig:
    """Everything a report run needs.

    Defaults follow the published parameter choices where there are any:
    thresholds q = 2, 3, 4, 5 and one thousand bootstrap replicates.
    """

    inputs: Tuple[InstrumentInput, ...] = ()
    ingest_config: Optional[str] = None
    q_list: Tuple[float, ...] = DEFAULT_Q_LIST
    q_grid: Optional[Tuple[float, ...]] = None
    n_boot: int = DEFAULT_N_BOOT
    seed: int = 0
    out_dir: str = "report"
    threads: int = 1
    xmin_floor: float = 0.1
    n_tail_floor: int = 50
    bootstrap_rescan: bool = False
    conditional_bins: int = 4
    mean_conditional_bins: int = 20
    mean_conditional_binning: str = "log"
    dfa_order: int = 1
    dfa_scales: Optional[Tuple[int, ...]] = None
    memory_min_intervals: int = 200
    trace_trigger: float = 5.0
    trace_horizon: int = 240
    correlation_method: str = "pearson"
    extras: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        """Validates field values."""
        if not self.q_list:
            raise ConfigError("q_list must contain at least one threshold")
        if any(q <= 0 for q in self.q_list):
            raise ConfigError(f"thresholds must be positive, got {list(self.q_list)}")
        if self.q_grid is not None and any(value < 0 for value in self.q_grid):
            raise ConfigError("Q_grid values must be non-negative")
        if self.n_boot < 1:
            raise ConfigError(f"n_boot must be at least 1, got {self.n_boot}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
        if self.n_tail_floor < 2:
            raise ConfigError("n_tail_floor must be at least 2")
        if self.conditional_bins < 2 or self.mean_conditional_bins < 1:
            raise ConfigError("conditional bin counts must be positive (at least 2 for quartile bins)")
        if self.mean_conditional_binning not in ("log", "linear"):
            raise ConfigError(f"mean_conditional_binning must be 'log' or 'linear', got {self.mean_conditional_binning!r}")
        if self.dfa_order < 1:
            raise ConfigError("dfa_order must be at least 1")
        if self.dfa_scales is not None:
            smallest = max(4, self.dfa_order + 2)
            if len(set(self.dfa_scales)) < 2 or min(self.dfa_scales) < smallest:
                raise ConfigError(f"dfa_scales needs two distinct scales of at least {smallest}, "
                                  f"got {list(self.dfa_scales)}")
        if self.trace_horizon < 1:
            raise ConfigError("trace_horizon must be at least 1")
        if self.correlation_method not in ("pearson", "spearman"):
            raise ConfigError(f"correlation_method must be 'pearson' or 'spearman', got {self.correlation_method!r}")
        instruments = [item.instrument for item in self.inputs]
        if len(set(instruments)) != len(instruments):
            raise ConfigError(f"instrument ids must be unique, got {instruments}")

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Returns a copy with the non-None overrides applied."""
        values = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **values) if values else self

    def hashable_dict(self) -> Dict[str, Any]:
        """Canonical dict of the fields that determine results."""
        data = asdict(self)
        data.pop("extras", None)
        for key in _UNHASHED_FIELDS:
            data.pop(key, None)
        return data

    def config_hash(self) -> str:
        """SHA256 of the canonical JSON of :meth:`hashable_dict`."""
        canonical = json.dumps(self.hashable_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_INT_FIELDS = ("n_boot", "seed", "threads", "n_tail_floor", "conditional_bins",
               "mean_conditional_bins", "dfa_order", "memory_min_intervals", "trace_horizon")
_FLOAT_FIELDS = ("xmin_floor", "trace_trigger")
_STR_FIELDS = ("ingest_config", "out_dir", "mean_conditional_binning", "correlation_method")


def run_config_from_dict(settings: Dict[str, Any], base_dir: Optional[Path] = None) -> RunConfig:
    """Builds a validated :class:`RunConfig` from a settings dictionary.

    Relative input and ingest-config paths are resolved against ``base_dir``.

    Args:
        settings: Parsed JSON settings.
        base_dir: Directory of the settings file.

    Returns:
        The run configuration.

    Raises:
        ConfigError: On wrong types, unknown keys or invalid values.
    """
    if not isinstance(settings, dict):
        raise ConfigError("settings must be a JSON object")

    def resolve(path: str) -> str:
        if base_dir is None or Path(path).is_absolute():
            return path
        return str(base_dir / path)

    values: Dict[str, Any] = {}
    extras: Dict[str, Any] = {}
    try:
        for key, value in settings.items():
            if key == "inputs":
                inputs = []
                for entry in value:
                    if isinstance(entry, str):
                        entry = {"path": entry}
                    path = resolve(str(entry["path"]))
                    inputs.append(InstrumentInput(path=path, instrument=str(entry.get("instrument") or Path(path).stem)))
                values["inputs"] = tuple(inputs)
            elif key == "q_list":
                values["q_list"] = parse_float_list(value, key)
            elif key in ("Q_grid", "q_grid"):
                values["q_grid"] = None if value is None else parse_float_list(value, key)
            elif key == "dfa_scales":
                values["dfa_scales"] = None if value is None else tuple(int(item) for item in value)
            elif key == "bootstrap_rescan":
                values[key] = value if isinstance(value, bool) else parse_bool(str(value), key)
            elif key in _INT_FIELDS:
                if isinstance(value, bool) or int(value) != value:
                    raise ConfigError(f"{key}: expected an integer, got {value!r}")
                values[key] = int(value)
            elif key in _FLOAT_FIELDS:
                values[key] = float(value)
            elif key in _STR_FIELDS:
                values[key] = resolve(str(value)) if key == "ingest_config" else str(value)
            elif key.startswith("_"):
                extras[key] = value
            else:
                raise ConfigError(f"unknown settings key {key!r}")
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid settings value: {e}") from e

    if "threads" not in values:
        values["threads"] = default_workers()
    return RunConfig(extras=extras, **values)


def load_run_config(settings_path: Union[str, Path]) -> RunConfig:
    """Loads settings.json into a :class:`RunConfig`.

    Args:
        settings_path: Path of the JSON settings file.

    Returns:
        The validated run configuration.

    Raises:
        ConfigError: If the file cannot be read, decoded or validated.
    """
    settings_path = Path(settings_path)
    try:
        with open(settings_path, "r", encoding="utf-8") as f:
            settings = json.load(f)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        raise ConfigError(f"could not load settings file at {settings_path}: {e}") from e
    logger.info("Loaded settings from %s", settings_path)
    return run_config_from_dict(settings, base_dir=settings_path.resolve().parent)
