"""
Tests package for the Numerics module
"""
