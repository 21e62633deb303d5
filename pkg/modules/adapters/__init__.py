"""
Adapters Module

Desk-scale classifiers whose frozen linear layers are adapted through
W0 + scale·A·R·B, with explicit reverse-mode gradients, AdamW training,
parameter accounting and checkpoints.
"""
