"""Exact volumes, quadratic moments and expected recourse for two-stage
stochastic linear programs with uniformly distributed randomness."""

__version__ = "0.1.0"
