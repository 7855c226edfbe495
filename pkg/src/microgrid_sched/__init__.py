"""Day-ahead stochastic scheduling of a microgrid that follows a DMO power-transfer schedule."""

__version__ = "0.1.0"
