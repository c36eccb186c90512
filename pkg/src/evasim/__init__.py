"""Simulation of driver-initiated pedestrian evasion with three steering interfaces."""

__version__ = "0.1.0"
