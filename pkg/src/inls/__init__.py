"""Numerical laboratory for the radial focusing inhomogeneous NLS with potential."""

__version__ = "0.1.0"
