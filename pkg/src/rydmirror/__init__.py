"""Rydberg-switched cooperative atomic mirror: models, solvers and analysis."""
__version__ = "0.1.0"
