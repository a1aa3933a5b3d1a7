"""Generalized numbers over a gauge, sharply holomorphic nets, and embeddings of distributions."""

__version__ = "0.1.0"
