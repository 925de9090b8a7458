"""Chaotic scattering with one open and two closed degrees of freedom."""
__version__ = "0.1.0"
