"""
Projections Module

Frozen projection pairs (A, B) built from a pretrained weight matrix:
truncated SVD, whitened SVD, 2-D DCT, Haar-random bases and half/half
hybrids, plus reconstruction diagnostics.
"""
