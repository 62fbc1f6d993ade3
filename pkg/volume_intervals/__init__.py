"""Recurrence interval analysis of minute-sampled trading volumes."""

__version__ = "0.1.0"
