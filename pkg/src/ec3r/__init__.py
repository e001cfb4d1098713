"""Numerical simulator of the multi-round probe-resonance algorithm for EC3."""

__version__ = "0.1.0"
