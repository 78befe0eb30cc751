"""Robust control invariant sets of discrete-time systems via symbolic images."""

__version__ = "0.1.0"
