"""Simulation and pulse design for a three-level (qutrit) transmon quantum battery."""

__version__ = "0.1.0"
