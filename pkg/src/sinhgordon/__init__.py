"""Numerics for periodic finite-type solutions of the elliptic sinh-Gordon equation."""

__version__ = "0.1.0"
