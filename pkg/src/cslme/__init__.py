"""Correlatively sparse Lagrange multiplier expressions for polynomial
optimization, with the matching moment-SOS relaxations."""

__version__ = "0.1.0"
