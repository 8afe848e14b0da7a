"""Exact and Monte Carlo laboratory for the information cost of learning
in stochastic convex optimization."""

__version__ = "0.1.0"
