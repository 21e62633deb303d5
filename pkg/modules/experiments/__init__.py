"""
Experiments Module

Run configuration, synthetic data and the phase-by-phase pipeline behind
the management commands.
"""
