"""
Predictive Module

Bayesian model averaging over posterior samples, the entropy
decomposition and the evaluation metrics.
"""
