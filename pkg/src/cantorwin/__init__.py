"""Generalized Cantor sets, resonant families, bad points and absolute games."""
__version__ = "0.1.0"
