"""Greedy geographic routing with reactive void deflection."""

__version__ = "0.1.0"
