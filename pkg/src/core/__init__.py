"""Billiard geometry, orbit solvers, spectra and isospectral operators."""
