"""
Laplace Module

Post-hoc Gaussian posterior over the cores at a MAP checkpoint: GGN
diagonal and Kronecker-factored curvature, evidence-based prior tuning,
sampling and the linearized logit covariance.
"""
