"""Numerical laboratory for half-space Poisson operators and anisotropic function-space norms."""

__version__ = "0.1.0"
