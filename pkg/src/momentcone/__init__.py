"""Moment-cone diagnostics for random measures."""

__version__ = "0.1.0"
