"""
Test Factories for the Laplace Module
"""

import factory
import numpy as np

from modules.laplace.models import CurvatureDiag, CurvatureKron, KronFactor, LaplacePosterior


class CurvatureDiagFactory(factory.Factory):
    class Meta:
        model = CurvatureDiag

    h = factory.LazyFunction(lambda: np.array([4.0, 1.0, 0.25]))
    n_data = 10


class KronFactorFactory(factory.Factory):
    class Meta:
        model = KronFactor

    layer_index = 0
    start = 0
    stop = 4
    A_cov = factory.LazyFunction(lambda: np.array([[2.0, 0.5], [0.5, 1.0]]))
    G_cov = factory.LazyFunction(lambda: np.array([[1.5, -0.3], [-0.3, 0.5]]))


class LaplacePosteriorFactory(factory.Factory):
    """DIAG by default; pass ``structure="KRON"`` with a CurvatureKron."""

    class Meta:
        model = LaplacePosterior

    theta_map = factory.LazyFunction(lambda: np.array([0.5, -1.0, 2.0]))
    structure = "DIAG"
    prior_precision = 1.0
    curvature = factory.SubFactory(CurvatureDiagFactory)


def kron_curvature(n_data=1, factors=None):
    factors = factors or [KronFactorFactory()]
    return CurvatureKron(factors=list(factors), n_data=n_data)
