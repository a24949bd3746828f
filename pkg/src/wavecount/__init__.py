"""Lattice counting, compression cones and constant-term asymptotics."""

__version__ = "0.1.0"
