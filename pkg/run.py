"""Main script to run the full report.

This script:
- Loads settings.json from the working directory.
- Runs every analysis stage for every configured instrument.
- Leaves a .partial marker in the output directory if interrupted by a signal.
"""
import logging
import signal
import sys
from pathlib import Path
from types import FrameType
from typing import Optional

from volume_intervals.cli import LOG_FORMAT
from volume_intervals.errors import AnalysisError
from volume_intervals.report import PARTIAL_MARKER, run_full_report
from volume_intervals.settings import load_run_config

SETTINGS_FILE = "settings.json"

out_dir: Optional[Path] = None


def handle_exit(sig: int, frame: Optional[FrameType]) -> None:
    """Handles script termination signals.

    Args:
        sig: The signal number received.
        frame: The current stack frame.
    """
    print(f"\nSignal {sig} received. Stopping report...")
    if out_dir is not None and out_dir.is_dir():
        try:
            (out_dir / PARTIAL_MARKER).write_text(f"interrupted by signal {sig}\n", encoding="utf-8")
            print(f"Partial outputs kept in {out_dir}")
        except OSError as e:
            print(f"Could not write the partial marker: {e}")
    print("Exiting.")
    sys.exit(128 + sig)


if __name__ == "__main__":
    signal.signal(signal.SIGINT, handle_exit)
    signal.signal(signal.SIGTERM, handle_exit)
    if hasattr(signal, "SIGBREAK"):
        signal.signal(signal.SIGBREAK, handle_exit)

    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
    print("--- Starting Report ---")
    try:
        config = load_run_config(SETTINGS_FILE)
        out_dir = Path(config.out_dir)
        rows = run_full_report(config)
    except AnalysisError as e:
        print(f"Report failed: {e}")
        sys.exit(e.exit_code)

    for row in rows:
        print(f"{row['instrument']}: x_min={row['x_min']:.3g} delta={row['delta']:.3f}({row['delta_se']:.3f}) "
              f"p_KS={row['p_ks']:.3f} p_KSW={row['p_ksw']:.3f} W2={row['w2']:.3f}")
    print(f"Report written to {out_dir}")
