"""Numerical lab for weighted spectral multiplier estimates on finite metric measure spaces"""

__version__ = "0.1.0"
