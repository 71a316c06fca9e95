"""Verification toolkit for conservation-law structures of variational
problems on flat and hyperbolic 2D domains (plus 1D Lagrangians)."""

__version__ = "0.1.0"
