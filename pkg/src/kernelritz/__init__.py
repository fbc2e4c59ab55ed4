"""Kernel ansatz functions for energy minimisation of elliptic boundary-value problems."""

__version__ = "0.1.0"
