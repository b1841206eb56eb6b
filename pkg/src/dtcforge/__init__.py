"""Optimal-control synthesis of period-doubled (time-crystalline) responses."""

__version__ = "0.1.0"
