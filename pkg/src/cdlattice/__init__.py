"""Bakry-Emery curvature-dimension checks for jump operators on the integer lattice."""

__version__ = "0.1.0"
