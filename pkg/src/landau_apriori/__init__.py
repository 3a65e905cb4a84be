"""Numerical toolkit for the space-homogeneous Landau equation in nondivergence form."""

__version__ = "0.1.0"
