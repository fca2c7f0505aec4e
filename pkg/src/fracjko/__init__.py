"""Minimizing-movement solver for time-fractional porous-medium equations."""

__version__ = "0.1.0"
