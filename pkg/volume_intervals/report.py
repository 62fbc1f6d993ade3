"""Report bundle: every analysis stage for every instrument, written to disk.

Layout of a bundle::

    <out>/report.json            one row per instrument (fit and goodness of fit)
    <out>/manifest.json          seed, config hash, version, input and artifact hashes
    <out>/<instrument>/*.tsv     plot-ready data
    <out>/<instrument>/*.json    per-threshold exponents and correlations
"""
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import psutil

from . import __version__
from .binning import log_binned_pdf
from .coupling import CouplingReport, VolumeTrace, conditioned_volume_trace, coupling_report
from .errors import AnalysisError, ConfigError, NoTriggerError, OutputError, StageError
from .gof import GofReport, goodness_of_fit
from .ingest import IngestConfig, MinuteBarSeries, SessionCalendar, load_ingest_config, load_minute_bars, to_returns
from .intervals import ConditionalStats, MeanConditionalPoint, RecurrenceIntervalSeries, conditional_pdf, \
    extract_intervals, mean_conditional_interval, scaled_pdf
from .memory import MemoryReport, interval_memory_report
from .parallel import parallel_map
from .preprocess import IntradayProfile, NormalizedSeries, normalize_returns, normalize_volumes
from .settings import InstrumentInput, RunConfig
from .tailfit import PowerLawFit, fit_curve, fit_tail, pooled_scaled_sample

logger = logging.getLogger(__name__)

PARTIAL_MARKER = ".partial"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"
ARTIFACTS = ("profile.tsv", "scaled_pdf.tsv", "tail_fit.tsv", "conditional.tsv", "mean_conditional.tsv",
             "dfa.tsv", "dfa.json", "trace.tsv", "correlation.json", "comovement.tsv")


def file_sha256(path: Union[str, Path]) -> Optional[str]:
    """Computes the SHA256 hash of a file.

    Args:
        path: The path to the file.

    Returns:
        The hex digest of the file's hash, or None if the file doesn't exist.
    """
    h = hashlib.sha256()
    if not os.path.exists(path):
        return None
    with open(path, 'rb') as f:
        while True:
            chunk = f.read(65536)
            if not chunk:
                break
            h.update(chunk)
    return h.hexdigest()


def _plain(value: Any) -> Any:
    """Converts numpy scalars and arrays to JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_json(path: Union[str, Path], data: Any) -> None:
    """Writes JSON with sorted keys; NaN and infinity are rejected.

    Raises:
        OutputError: If a value is not finite or the file cannot be written.
    """
    try:
        text = json.dumps(_plain(data), indent=2, sort_keys=True, allow_nan=False)
    except ValueError as e:
        raise OutputError(f"{path}: refusing to write a non-finite number ({e})") from e
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text + "\n")
    except OSError as e:
        raise OutputError(f"could not write {path}: {e}") from e


def write_tsv(path: Union[str, Path], columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """Writes a tab-separated table with a header row.

    Raises:
        OutputError: If the file cannot be written.
    """
    frame = pd.DataFrame(list(rows), columns=list(columns))
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, sep="\t", index=False, float_format="%.10g", lineterminator="\n")
    except OSError as e:
        raise OutputError(f"could not write {path}: {e}") from e


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tags analysis and numeric errors raised inside the block with the stage name."""
    try:
        yield
    except StageError:
        raise
    except (AnalysisError, ValueError, ArithmeticError) as e:
        raise StageError(name, e) from e


def write_profile(directory: Path, profile: IntradayProfile, calendar: SessionCalendar) -> None:
    """Intraday pattern per minute of the session."""
    rows = [(s, label, a) for s, (label, a) in enumerate(zip(calendar.slot_labels(), profile.a))]
    write_tsv(directory / "profile.tsv", ("slot", "time", "a"), rows)


def write_scaled_pdfs(directory: Path, v: NormalizedSeries, q_list: Sequence[float]) -> None:
    """Scaled interval densities of every threshold, the collapse plot data."""
    rows = []
    for q in q_list:
        estimate = scaled_pdf(extract_intervals(v, q))
        rows.extend((q, x, p, n, lo, hi) for x, p, n, lo, hi in
                    zip(estimate.x, estimate.p, estimate.n, estimate.lo, estimate.hi))
    write_tsv(directory / "scaled_pdf.tsv", ("q", "x", "p", "n", "lo", "hi"), rows)


def write_intervals(directory: Path, ris: RecurrenceIntervalSeries) -> Path:
    """Raw intervals of one threshold with the index of the exceedance opening each."""
    path = directory / f"intervals_q{ris.q:g}.tsv"
    write_tsv(path, ("start_index", "tau"), zip(ris.start_index.tolist(), ris.tau.tolist()))
    return path


def write_tail_fit(directory: Path, pooled: np.ndarray, fit: PowerLawFit) -> None:
    """Pooled scaled density and the fitted power law at the same points."""
    estimate = log_binned_pdf(pooled)
    curve = fit_curve(fit, estimate.x)
    rows = [(x, p, n, f if x >= fit.x_min else None) for x, p, n, f in zip(estimate.x, estimate.p, estimate.n, curve)]
    write_tsv(directory / "tail_fit.tsv", ("x", "p", "n", "fit"), rows)


def write_conditional(directory: Path, conditionals: Sequence[ConditionalStats],
                      means: Sequence[Tuple[float, List[MeanConditionalPoint]]]) -> None:
    """Conditional densities per preceding-interval bin, and mean conditional intervals."""
    rows = []
    for cond in conditionals:
        for b in cond.bins:
            if b.empty:
                continue
            rows.extend((cond.q, b.index, b.tau0_lo, b.tau0_hi, x, p, n) for x, p, n in b.pdf.points)
    write_tsv(directory / "conditional.tsv", ("q", "bin", "tau0_lo", "tau0_hi", "x", "p", "n"), rows)
    mean_rows = [(q, point.x, point.y, point.n, point.se) for q, points in means for point in points]
    write_tsv(directory / "mean_conditional.tsv", ("q", "x", "y", "n", "se"), mean_rows)


def write_memory(directory: Path, memory: MemoryReport) -> None:
    """Fluctuation functions and exponents of the series and its intervals."""
    rows = [("series", None, scale, f) for scale, f in memory.series.points]
    summary = {"series": {"alpha": memory.series.alpha, "alpha_se": memory.series.alpha_se},
               "seed": memory.seed, "order": memory.series.order, "thresholds": []}
    for entry in memory.entries:
        rows.extend(("raw", entry.q, scale, f) for scale, f in entry.raw.points)
        rows.extend(("shuffled", entry.q, scale, f) for scale, f in entry.shuffled.points)
        summary["thresholds"].append({
            "q": entry.q, "n_intervals": entry.n_intervals, "n_shuffled_intervals": entry.n_shuffled_intervals,
            "alpha_raw": entry.raw.alpha, "alpha_raw_se": entry.raw.alpha_se,
            "alpha_shuffled": entry.shuffled.alpha, "alpha_shuffled_se": entry.shuffled.alpha_se,
        })
    write_tsv(directory / "dfa.tsv", ("series", "q", "l", "F"), rows)
    write_json(directory / "dfa.json", summary)


def write_trace(directory: Path, trace: Optional[VolumeTrace]) -> None:
    """Average volume after large returns; header only when no event was found."""
    rows = [] if trace is None else list(zip(trace.offsets, trace.mean))
    write_tsv(directory / "trace.tsv", ("offset", "v"), rows)


def write_coupling(directory: Path, reports: Sequence[CouplingReport]) -> None:
    """Interval-return correlations per threshold and the comovement curves."""
    write_json(directory / "correlation.json", [
        {"q": rep.q, "c_r_tau": rep.c_r_tau, "n_pairs": rep.n_pairs, "method": rep.method,
         "n_tau": rep.n_tau, "n_tau_raw": rep.n_tau_raw} for rep in reports])
    rows = [(rep.q, point.Q, point.p, point.n_kept, point.n_total) for rep in reports for point in rep.comovement]
    write_tsv(directory / "comovement.tsv", ("q", "Q", "p", "n_kept", "n_total"), rows)


def table_row(instrument: str, fit: PowerLawFit, gof: GofReport) -> Dict[str, Any]:
    """One row of the fit summary table."""
    return {
        "instrument": instrument, "x_min": fit.x_min, "delta": fit.delta, "delta_se": fit.delta_se,
        "c": fit.c, "c_pareto": fit.c_pareto, "n_tail": fit.n_tail, "n_total": fit.n_total,
        "ks": gof.ks, "p_ks": gof.p_ks, "ksw": gof.ksw, "p_ksw": gof.p_ksw, "w2": gof.w2,
        "decision_ks": gof.decision_ks, "decision_ksw": gof.decision_ksw, "decision_cvm": gof.decision_cvm,
        "n_boot": gof.n_boot, "seed": gof.seed,
    }


@dataclass(frozen=True, eq=False)
class PreparedInstrument:
    """Loaded bars with their normalized volumes and absolute returns."""

    series: MinuteBarSeries
    profile: IntradayProfile
    v: NormalizedSeries
    r: NormalizedSeries


def resolve_ingest_config(config: RunConfig) -> IngestConfig:
    """The run's ingest config, or the default one."""
    return load_ingest_config(config.ingest_config) if config.ingest_config else IngestConfig()


def prepare_instrument(path: Union[str, Path], ingest_config: IngestConfig) -> PreparedInstrument:
    """Loads and normalizes one input file."""
    with stage("ingest"):
        series = load_minute_bars(path, ingest_config)
        returns = to_returns(series)
    with stage("preprocess"):
        profile, v = normalize_volumes(series)
        r = normalize_returns(returns)
    return PreparedInstrument(series=series, profile=profile, v=v, r=r)


def analyze_instrument(config: RunConfig, item: InstrumentInput, out_dir: Path, workers: int = 1) -> Dict[str, Any]:
    """Runs every stage for one instrument and writes its artifacts.

    Args:
        config: Run configuration.
        item: Input file and instrument id.
        out_dir: Bundle root; artifacts go to ``out_dir / item.instrument``.
        workers: Processes for the candidate scan and the bootstrap.

    Returns:
        The instrument's summary table row.

    Raises:
        StageError: Naming the failing stage.
    """
    directory = out_dir / item.instrument
    logger.info("Analyzing %s from %s", item.instrument, item.path)
    data = prepare_instrument(item.path, resolve_ingest_config(config))
    v, r = data.v, data.r
    q_list = config.q_list

    with stage("profile"):
        write_profile(directory, data.profile, data.series.calendar)
    with stage("intervals"):
        write_scaled_pdfs(directory, v, q_list)
    with stage("tailfit"):
        pooled = pooled_scaled_sample(v, q_list)
        fit = fit_tail(pooled, config.xmin_floor, config.n_tail_floor, workers=workers)
        write_tail_fit(directory, pooled, fit)
    with stage("gof"):
        gof = goodness_of_fit(pooled, fit, n_boot=config.n_boot, seed=config.seed, rescan=config.bootstrap_rescan,
                              x_min_floor=config.xmin_floor, n_tail_floor=config.n_tail_floor, workers=workers)
    with stage("conditional"):
        conditionals, means = [], []
        for q in q_list:
            ris = extract_intervals(v, q)
            conditionals.append(conditional_pdf(ris, config.conditional_bins))
            means.append((q, mean_conditional_interval(ris, config.mean_conditional_bins,
                                                       config.mean_conditional_binning)))
        write_conditional(directory, conditionals, means)
    with stage("memory"):
        memory = interval_memory_report(v, q_list, seed=config.seed, min_intervals=config.memory_min_intervals,
                                        scales=config.dfa_scales, order=config.dfa_order)
        write_memory(directory, memory)
    with stage("coupling"):
        reports = [coupling_report(v, r, q, config.q_grid, config.correlation_method) for q in q_list]
        write_coupling(directory, reports)
    with stage("trace"):
        try:
            trace = conditioned_volume_trace(v, r, config.trace_trigger, config.trace_horizon)
        except NoTriggerError as e:
            logger.warning("%s: no volume trace, %s", item.instrument, e)
            trace = None
        write_trace(directory, trace)

    logger.debug("Resident memory after %s: %.1f MiB", item.instrument,
                 psutil.Process().memory_info().rss / 2 ** 20)
    row = table_row(item.instrument, fit, gof)
    row["trace_events"] = 0 if trace is None else trace.n_events
    return row


def _analyze_task(task: Tuple[RunConfig, InstrumentInput, str, int]) -> Dict[str, Any]:
    config, item, out_dir, workers = task
    return analyze_instrument(config, item, Path(out_dir), workers)


def _artifact_hashes(out_dir: Path, instruments: Sequence[str]) -> Dict[str, str]:
    hashes = {REPORT_FILE: file_sha256(out_dir / REPORT_FILE)}
    for instrument in instruments:
        for name in ARTIFACTS:
            digest = file_sha256(out_dir / instrument / name)
            if digest is None:
                raise OutputError(f"artifact {instrument}/{name} is missing")
            hashes[f"{instrument}/{name}"] = digest
    return hashes


def write_manifest(config: RunConfig, out_dir: Path) -> Dict[str, Any]:
    """Writes the manifest of a finished bundle and returns it."""
    instruments = [item.instrument for item in config.inputs]
    manifest = {
        "version": __version__,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "inputs": [{"instrument": item.instrument, "file": Path(item.path).name, "sha256": file_sha256(item.path)}
                   for item in config.inputs],
        "artifacts": _artifact_hashes(out_dir, instruments),
    }
    write_json(out_dir / MANIFEST_FILE, manifest)
    return manifest


def run_full_report(config: RunConfig) -> List[Dict[str, Any]]:
    """Runs the whole pipeline and writes the report bundle.

    Instruments are analyzed in parallel when there are several; a single
    instrument gets the workers for its own bootstrap and candidate scan.
    On failure the partial outputs are kept next to a ``.partial`` marker
    naming the failing stage.

    Args:
        config: Validated run configuration with at least one input.

    Returns:
        The summary table rows, one per instrument in input order.

    Raises:
        ConfigError: If no input is configured.
        StageError: If a stage fails.
        OutputError: If the bundle cannot be written.
    """
    if not config.inputs:
        raise ConfigError("no inputs configured")
    out_dir = Path(config.out_dir)
    marker = out_dir / PARTIAL_MARKER
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        marker.write_text("running\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"could not create output directory {out_dir}: {e}") from e

    many = len(config.inputs) > 1
    tasks = [(config, item, str(out_dir), 1 if many else config.threads) for item in config.inputs]
    try:
        rows = parallel_map(_analyze_task, tasks, config.threads if many else 1)
        with stage("output"):
            write_json(out_dir / REPORT_FILE, rows)
            write_manifest(config, out_dir)
    except Exception as e:
        if isinstance(e, StageError):
            failed = e.stage
        else:
            failed = "output" if isinstance(e, AnalysisError) else "unknown"
        logger.error("Report failed in stage %s: %s", failed, e)
        marker.write_text(f"failed in stage {failed}: {e}\n", encoding="utf-8")
        raise
    marker.unlink()
    logger.info("Report for %d instrument(s) written to %s", len(rows), out_dir)
    return rows
