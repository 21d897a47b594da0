"""Numerical tools for manipulating two-qubit EPR steering with local filters."""

__version__ = "0.1.0"
