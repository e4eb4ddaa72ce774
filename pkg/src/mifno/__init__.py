"""Frozen-natural-orbital method of increments for correlation energies."""

__version__ = "0.1.0"
