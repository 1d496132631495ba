"""Sparse neural networks on fixed random and structured bipartite topologies."""

__version__ = "0.1.0"
