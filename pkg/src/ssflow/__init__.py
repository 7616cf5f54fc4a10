"""Numerical laboratory for the shortening-straightening flow of open planar curves."""

__version__ = "0.1.0"
