"""Intrinsic dimension estimation for point clouds."""

__version__ = "0.1.0"
