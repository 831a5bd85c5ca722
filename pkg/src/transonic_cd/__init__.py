"""Steady transonic nozzle flow with a contact discontinuity."""

__version__ = "0.1.0"
