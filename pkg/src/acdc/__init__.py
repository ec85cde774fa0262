"""Coevolution of a model-genome archive and a synthetic task archive."""

__version__ = "0.1.0"
