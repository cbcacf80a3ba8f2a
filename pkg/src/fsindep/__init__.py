"""Finite-state independent normal words: greedy pair builder and companion extraction."""

__version__ = "0.1.0"
