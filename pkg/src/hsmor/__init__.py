"""Drifter-field simulator for iterative-averaging hierarchical grouping."""
__version__ = "0.1.0"
