"""Exact finitary machinery for density Ramsey statements on trees and grids."""

__version__ = "0.1.0"
