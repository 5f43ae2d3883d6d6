"""Numerical toolkit for the planar circular restricted three-body problem."""

__version__ = "0.1.0"
