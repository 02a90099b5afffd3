"""Killed lattice random walks in convex cones: exact dynamic programming,
Green functions, discrete harmonic functions and asymptotic checks."""

__version__ = "0.1.0"
