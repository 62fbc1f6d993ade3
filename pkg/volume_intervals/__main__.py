"""Allows ``python -m volume_intervals``."""
import sys

from .cli import main

sys.exit(main())
