"""
Numerics Module

Dense linear algebra, running second-moment accumulation, seeded random
streams and the SBMX matrix file format that every other module builds on.
"""
