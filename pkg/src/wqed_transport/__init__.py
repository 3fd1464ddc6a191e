"""Excitation transport between two chirally coupled atom arrays on a waveguide."""

__version__ = "0.1.0"
