"""Adaptive human-robot team scheduling with learned teammate models."""

__version__ = "0.1.0"
