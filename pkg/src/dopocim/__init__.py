"""Stochastic simulation of a 16-pulse DOPO coherent Ising machine."""

__version__ = "0.1.0"
