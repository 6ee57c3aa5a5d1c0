"""Exact and numerical toolkit for pseudo-automorphisms and birational maps of 3-folds."""

__version__ = "0.1.0"
