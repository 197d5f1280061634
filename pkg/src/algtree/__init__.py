"""Finite algebraic measure trees, their shapes, and circle sub-triangulations."""

__version__ = "0.1.0"
