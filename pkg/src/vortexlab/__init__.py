"""Lattice vortex laboratory on the flat Kaehler 4-torus."""

__version__ = "0.1.0"
