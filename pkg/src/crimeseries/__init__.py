"""Unsupervised embeddings of free-text incident narratives with a Gaussian-Bernoulli RBM."""

__version__ = "0.1.0"
