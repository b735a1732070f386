"""Numerical BCS gap equation, critical temperature and Ginzburg-Landau tools."""

__version__ = "0.1.0"
