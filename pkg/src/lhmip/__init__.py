"""Exact simulator of a five-prover interactive proof for the k-local Hamiltonian problem."""

__version__ = "0.1.0"
