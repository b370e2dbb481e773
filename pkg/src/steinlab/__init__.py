"""Stein-pair concentration laboratory for Curie-Weiss, lattice Ising and ERGM Gibbs measures."""

__version__ = "0.1.0"
