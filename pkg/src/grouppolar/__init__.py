"""Multilevel polar codes over finite Abelian group alphabets."""

__version__ = "0.1.0"
