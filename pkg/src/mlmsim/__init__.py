"""Simulator for a memristive multi-level memory cell with a ternary data encoder."""

__version__ = "0.1.0"
