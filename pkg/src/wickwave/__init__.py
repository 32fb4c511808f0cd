"""Spectral laboratory for Wick-renormalized wave dynamics on the torus and the sphere."""

__version__ = "0.1.0"
