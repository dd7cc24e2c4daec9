"""Finitely presented Kuranishi structures in the affine class."""

__version__ = "0.1.0"
