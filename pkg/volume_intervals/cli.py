"""Command-line interface: one subcommand per analysis stage plus the full report."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import __version__
from .coupling import comovement_probability, conditioned_volume_trace, coupling_report, default_q_grid
from .errors import AnalysisError, ConfigError
from .gof import goodness_of_fit
from .ingest import MinuteBarSeries, write_minute_bars
from .intervals import conditional_pdf, extract_intervals, mean_conditional_interval
from .memory import interval_memory_report
from .parallel import default_workers
from .report import (PreparedInstrument, prepare_instrument, resolve_ingest_config, run_full_report, stage,
                     table_row, write_conditional, write_coupling, write_intervals, write_json, write_memory,
                     write_profile, write_scaled_pdfs, write_tail_fit, write_trace, write_tsv)
from .settings import InstrumentInput, RunConfig, load_run_config, parse_float_list
from .synth import gen, load_generator_spec
from .tailfit import fit_tail, pooled_scaled_sample

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
GOF_STATISTICS = ("ks", "ksw", "cvm")


def build_parser() -> argparse.ArgumentParser:
    """Creates the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(prog="volume-intervals",
                                     description="Recurrence-interval analysis of minute-bar trading volumes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON settings file")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker processes (default: physical cores)")
    parser.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    def with_input(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input", help="minute-bar CSV file")
        p.add_argument("--ingest-config", help="key-value ingest config")
        p.add_argument("--q", dest="q_list", help="comma-separated volume thresholds")
        return p

    with_input("profile", "intraday volume pattern")
    with_input("intervals", "scaled recurrence-interval densities")
    p = with_input("fit", "power-law fit of pooled scaled intervals")
    p.add_argument("--xmin-floor", type=float)
    p = with_input("gof", "fit plus bootstrap goodness of fit")
    p.add_argument("--xmin-floor", type=float)
    p.add_argument("--n-boot", type=int)
    p.add_argument("--stat", default="ks,ksw,cvm", help="statistics to report")
    p.add_argument("--rescan", action="store_true", help="re-scan x_min in every replicate")
    p = with_input("conditional", "conditional densities and mean conditional intervals")
    p.add_argument("--bins", type=int, help="rank bins of the preceding interval")
    p.add_argument("--mean-bins", type=int, help="bins of the mean conditional interval")
    p.add_argument("--binning", choices=("log", "linear"))
    p = with_input("dfa", "DFA of intervals, raw and shuffled")
    p.add_argument("--order", type=int)
    p.add_argument("--min-intervals", type=int)
    p = with_input("couple", "interval-return correlation and comovement")
    p.add_argument("--method", choices=("pearson", "spearman"))
    p.add_argument("--Q-grid", dest="q_grid", help="comma-separated return thresholds")
    p = with_input("trace", "average volume after large returns")
    p.add_argument("--trigger", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--event", type=int, help="follow a single event instead of averaging")
    p = with_input("comove", "comovement probability only")
    p.add_argument("--Q-grid", dest="q_grid", help="comma-separated return thresholds")

    p = sub.add_parser("synth", help="generate a synthetic dataset from a key-value spec")
    p.add_argument("spec", help="generator spec file")
    p.add_argument("--output", help="output file (default: <out>/<spec name>.csv)")

    p = sub.add_parser("report", help="full report bundle")
    p.add_argument("inputs", nargs="*", help="minute-bar CSV files (default: inputs of the settings file)")
    p.add_argument("--ingest-config", help="key-value ingest config")
    p.add_argument("--n-boot", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Settings file (or defaults) with command-line overrides applied."""
    config = load_run_config(args.config) if args.config else RunConfig(threads=default_workers())
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "threads": args.threads,
        "ingest_config": getattr(args, "ingest_config", None),
        "n_boot": getattr(args, "n_boot", None),
        "xmin_floor": getattr(args, "xmin_floor", None),
        "bootstrap_rescan": getattr(args, "rescan", None) or None,
        "conditional_bins": getattr(args, "bins", None),
        "mean_conditional_bins": getattr(args, "mean_bins", None),
        "mean_conditional_binning": getattr(args, "binning", None),
        "dfa_order": getattr(args, "order", None),
        "memory_min_intervals": getattr(args, "min_intervals", None),
        "correlation_method": getattr(args, "method", None),
        "trace_trigger": getattr(args, "trigger", None),
        "trace_horizon": getattr(args, "horizon", None),
    }
    if getattr(args, "q_list", None):
        overrides["q_list"] = parse_float_list(args.q_list, "--q")
    if getattr(args, "q_grid", None):
        overrides["q_grid"] = parse_float_list(args.q_grid, "--Q-grid")
    inputs = getattr(args, "inputs", None)
    if inputs:
        overrides["inputs"] = tuple(InstrumentInput(path=path, instrument=Path(path).stem) for path in inputs)
    try:
        return config.with_overrides(**overrides)
    except TypeError as e:
        raise ConfigError(f"invalid override: {e}") from e


def _prepare(args: argparse.Namespace, config: RunConfig) -> PreparedInstrument:
    return prepare_instrument(args.input, resolve_ingest_config(config))


def cmd_profile(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes the intraday pattern."""
    data = _prepare(args, config)
    write_profile(out, data.profile, data.series.calendar)


def cmd_intervals(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes scaled densities and raw intervals per threshold, plus a summary of counts."""
    data = _prepare(args, config)
    with stage("intervals"):
        write_scaled_pdfs(out, data.v, config.q_list)
        summary = []
        for q in config.q_list:
            ris = extract_intervals(data.v, q)
            write_intervals(out, ris)
            summary.append({"q": q, "n_intervals": len(ris), "mean_tau": ris.mean_tau})
        write_json(out / "intervals.json", summary)


def _fit(args: argparse.Namespace, config: RunConfig, out: Path) -> tuple:
    data = _prepare(args, config)
    with stage("tailfit"):
        pooled = pooled_scaled_sample(data.v, config.q_list)
        fit = fit_tail(pooled, config.xmin_floor, config.n_tail_floor, workers=config.threads)
        write_tail_fit(out, pooled, fit)
    return pooled, fit


def cmd_fit(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes the tail fit."""
    _, fit = _fit(args, config, out)
    write_json(out / "fit.json", {"instrument": Path(args.input).stem, "x_min": fit.x_min, "delta": fit.delta,
                                  "delta_se": fit.delta_se, "c": fit.c, "c_pareto": fit.c_pareto, "ks": fit.ks,
                                  "n_tail": fit.n_tail, "n_total": fit.n_total})


def cmd_gof(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes the tail fit together with the selected goodness-of-fit results."""
    selected = [s.strip() for s in args.stat.split(",") if s.strip()]
    unknown = set(selected) - set(GOF_STATISTICS)
    if unknown:
        raise ConfigError(f"--stat accepts {', '.join(GOF_STATISTICS)}; got {', '.join(sorted(unknown))}")
    pooled, fit = _fit(args, config, out)
    with stage("gof"):
        gof = goodness_of_fit(pooled, fit, n_boot=config.n_boot, seed=config.seed, rescan=config.bootstrap_rescan,
                              x_min_floor=config.xmin_floor, n_tail_floor=config.n_tail_floor,
                              workers=config.threads)
    row = table_row(Path(args.input).stem, fit, gof)
    dropped = {"ks": ("p_ks", "decision_ks"), "ksw": ("ksw", "p_ksw", "decision_ksw"), "cvm": ("w2", "decision_cvm")}
    for statistic, keys in dropped.items():
        if statistic not in selected:
            for key in keys:
                row.pop(key)
    write_json(out / "fit.json", row)


def cmd_conditional(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes conditional densities and mean conditional intervals."""
    data = _prepare(args, config)
    with stage("conditional"):
        conditionals, means = [], []
        for q in config.q_list:
            ris = extract_intervals(data.v, q)
            conditionals.append(conditional_pdf(ris, config.conditional_bins))
            means.append((q, mean_conditional_interval(ris, config.mean_conditional_bins,
                                                       config.mean_conditional_binning)))
        write_conditional(out, conditionals, means)


def cmd_dfa(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes fluctuation functions and exponents."""
    data = _prepare(args, config)
    with stage("memory"):
        memory = interval_memory_report(data.v, config.q_list, seed=config.seed,
                                        min_intervals=config.memory_min_intervals,
                                        scales=config.dfa_scales, order=config.dfa_order)
        write_memory(out, memory)


def cmd_couple(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes correlations and comovement curves."""
    data = _prepare(args, config)
    with stage("coupling"):
        reports = [coupling_report(data.v, data.r, q, config.q_grid, config.correlation_method)
                   for q in config.q_list]
        write_coupling(out, reports)


def cmd_comove(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes comovement curves only."""
    data = _prepare(args, config)
    grid = config.q_grid if config.q_grid is not None else default_q_grid(data.r)
    with stage("coupling"):
        rows = [(q, p.Q, p.p, p.n_kept, p.n_total)
                for q in config.q_list for p in comovement_probability(data.v, data.r, q, grid)]
        write_tsv(out / "comovement.tsv", ("q", "Q", "p", "n_kept", "n_total"), rows)


def cmd_trace(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Writes the conditioned volume trace."""
    data = _prepare(args, config)
    with stage("trace"):
        trace = conditioned_volume_trace(data.v, data.r, config.trace_trigger, config.trace_horizon, args.event)
        write_trace(out, trace)


def cmd_synth(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Generates a dataset and writes it as CSV."""
    spec = load_generator_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    path = Path(args.output) if args.output else out / f"{Path(args.spec).stem}.csv"
    data = gen(spec)
    if isinstance(data, MinuteBarSeries):
        write_minute_bars(data, path)
    else:
        write_tsv(path, ("x",), [(x,) for x in data])
    logger.info("Wrote %s data to %s", spec.kind, path)


def cmd_report(args: argparse.Namespace, config: RunConfig, out: Path) -> None:
    """Runs the full report."""
    if not config.inputs:
        raise ConfigError("report needs at least one input file")
    run_full_report(config)


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig, Path], None]] = {
    "profile": cmd_profile,
    "intervals": cmd_intervals,
    "fit": cmd_fit,
    "gof": cmd_gof,
    "conditional": cmd_conditional,
    "dfa": cmd_dfa,
    "couple": cmd_couple,
    "trace": cmd_trace,
    "comove": cmd_comove,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Runs the command line and returns the process exit code.

    Args:
        argv: Arguments without the program name; ``sys.argv[1:]`` by default.

    Returns:
        0 on success, otherwise the exit code of the error's category.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](args, config, Path(config.out_dir))
    except AnalysisError as e:
        logger.error("%s", e)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
