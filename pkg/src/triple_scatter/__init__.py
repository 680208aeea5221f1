"""Boundary-triple scattering laboratory."""

__version__ = "0.1.0"
