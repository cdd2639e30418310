"""Numerical laboratory for the thin one-phase free boundary problem."""

__version__ = "0.1.0"
