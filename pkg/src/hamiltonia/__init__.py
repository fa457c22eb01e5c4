"""Constructive Hamiltonian perturbation theory: series, trees, quadratures and checks."""

__version__ = "0.1.0"
