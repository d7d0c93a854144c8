"""Exact construction of a tree-like continuum carrying a fixed-point-free self-map."""

__version__ = "0.1.0"
