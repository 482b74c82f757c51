"""Coherence measures induced by quantum observables."""
__version__ = "0.1.0"
