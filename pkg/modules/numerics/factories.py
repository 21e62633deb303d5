"""
Test Factories for the Numerics Module
"""

import factory
import numpy as np

from modules.numerics.models import SeededRng, WelfordState


class SeededRngFactory(factory.Factory):
    class Meta:
        model = SeededRng

    seed = factory.Sequence(lambda n: 1000 + n)


class WelfordStateFactory(factory.Factory):
    class Meta:
        model = WelfordState

    dim = 3
    count = 0


def random_matrix(seed, rows, cols):
    """Standard-normal matrix from a fresh seeded stream."""
    return SeededRng(seed).standard_normal((rows, cols))


def random_spd(seed, dim, condition=None):
    """Random symmetric positive-definite matrix, optionally with a set condition number."""
    rng = SeededRng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    if condition is None:
        values = rng.uniform(dim) + 0.5
    else:
        values = np.logspace(0.0, np.log10(condition), dim)
    return (q * values) @ q.T
