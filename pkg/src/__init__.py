"""Monotonicity-based inclusion detection for linear elasticity."""
