"""Exact computations with Weil cochains, IM connections and Yang-Mills data on Lie algebroids."""

__version__ = "0.1.0"
