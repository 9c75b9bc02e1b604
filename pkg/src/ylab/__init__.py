"""Conformal-factor solvers and curvature reports for bounded Euclidean domains."""

__version__ = "0.1.0"
