"""sympb - symplectic billiards, area spectra and isospectral operators near ellipses."""

__version__ = "0.1.0"
__author__ = "Isaiah Myles"
