"""
Modules package for subspace Bayesian fine-tuning.

- numerics: Linear algebra, running moments, seeded randomness, matrix files
- projections: Subspace projection builders and diagnostics
- adapters: Adapted networks, MAP training, checkpoints
- swag: SWAG posterior
- laplace: Laplace posterior
- predictive: Model averaging, uncertainty and metrics
- experiments: Run configs, datasets and pipeline commands
"""
