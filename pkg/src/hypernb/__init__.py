"""Weighted non-backtracking spectral community detection for non-uniform
hypergraph stochastic block models."""

__version__ = "0.1.0"
