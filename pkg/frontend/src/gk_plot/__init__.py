"""Offline figure generation from granular-kinetics CSV outputs."""

__version__ = "0.1.0"
