"""Numerical laboratory for graphical space-like hypersurfaces in Minkowski space."""

__version__ = "0.1.0"
