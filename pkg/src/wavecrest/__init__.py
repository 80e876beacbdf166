"""Quasi-rectifiable frames, Lie module rescaling and reduced Euler systems."""

__version__ = "0.1.0"
