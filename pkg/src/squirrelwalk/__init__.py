"""Discrete-time squirrel random walk: exact analytics and simulation."""

__version__ = "0.1.0"
