"""Pairing on quantum graphs: two-body solutions, Richardson's exact solution and BCS fits."""

__version__ = "0.1.0"
