"""
SWAG Module

Gaussian posterior over the flattened cores fitted from the SGD trajectory
after burn-in: running mean, diagonal variance and a window of deviations.
"""
