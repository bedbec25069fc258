"""Calibrated surfaces in C^2 glued from a holomorphic seed and special Lagrangian necks."""

__version__ = "0.1.0"
