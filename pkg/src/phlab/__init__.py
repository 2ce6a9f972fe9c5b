"""Numerical tools for mostly expanding partially hyperbolic maps of the torus."""

__version__ = "0.1.0"
