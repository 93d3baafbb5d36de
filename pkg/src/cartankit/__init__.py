"""Numerical toolkit for coframings, Cartan geometries, and their morphisms."""
