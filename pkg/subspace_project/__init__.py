"""
Project package for Subspace Bayes.

Bayesian fine-tuning in projected subspaces: frozen pretrained weights,
fixed projections (A, B), trainable cores R and Gaussian posteriors over
the cores (SWAG, Laplace).
"""
