"""Simulator and analyzer for quantum oblivious-transfer and coin-flipping protocols."""

__version__ = "0.1.0"
