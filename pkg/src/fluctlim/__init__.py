"""Continuum limit of quantum fluctuations for permutation-invariant qubit ensembles."""

__version__ = "0.1.0"
