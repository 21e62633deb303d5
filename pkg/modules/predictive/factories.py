"""
Test Factories for the Predictive Module
"""

import factory
import numpy as np

from modules.numerics.models import SeededRng
from modules.predictive.models import PredictiveSamples


def simplex_rows(seed, rows, classes, concentration=1.0):
    """Dirichlet draws: ``rows`` points on the (classes−1)-simplex."""
    draws = SeededRng(seed).generator.dirichlet(np.full(classes, concentration), size=rows)
    return draws / draws.sum(axis=-1, keepdims=True)


class PredictiveSamplesFactory(factory.Factory):
    class Meta:
        model = PredictiveSamples

    class Params:
        seed = factory.Sequence(lambda n: 500 + n)
        inputs = 8
        samples = 5
        classes = 3

    probs = factory.LazyAttribute(
        lambda o: simplex_rows(o.seed, o.inputs * o.samples, o.classes).reshape(
            o.inputs, o.samples, o.classes
        )
    )
