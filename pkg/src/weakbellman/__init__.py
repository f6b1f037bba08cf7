"""Weak Bellman residual orthogonalization for offline policy evaluation and optimization."""

__version__ = "0.1.0"
