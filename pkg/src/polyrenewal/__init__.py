"""Lattice polymers in random environments through renewal structures."""

__version__ = "0.1.0"
