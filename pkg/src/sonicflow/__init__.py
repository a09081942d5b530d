"""Subsonic-sonic potential flow in a convergent approximate nozzle."""

__version__ = "0.1.0"
