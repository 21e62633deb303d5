"""
Models for the Laplace Module

Curvature is a sum over the dataset: the DIAG vector ``h`` directly, the
KRON factors as dataset averages scaled by ``n_data`` when used.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from modules.numerics.exceptions import ShapeError
from modules.numerics.models import as_vector
from modules.numerics.services import LinearAlgebraService


class Structure(str, Enum):
    DIAG = "DIAG"
    KRON = "KRON"


class Link(str, Enum):
    MC = "mc"
    LINEARIZED = "linearized"


@dataclass(frozen=True)
class CurvatureDiag:
    h: np.ndarray
    n_data: int

    def __post_init__(self):
        object.__setattr__(self, "h", as_vector(self.h, name="h"))
        if np.any(self.h < 0):
            raise ValueError("GGN diagonal must be non-negative")

    @property
    def dim(self):
        return int(self.h.shape[0])


@dataclass(frozen=True)
class KronFactor:
    """
    One adapted layer: ``A_cov`` averages uuᵀ over core inputs u, ``G_cov``
    averages the model-Fisher gradient outer products at the core output.
    """

    layer_index: int
    start: int
    stop: int
    A_cov: np.ndarray
    G_cov: np.ndarray

    @property
    def rank(self):
        return int(self.A_cov.shape[0])


@dataclass(frozen=True)
class CurvatureKron:
    factors: list
    n_data: int

    @property
    def dim(self):
        return sum(factor.rank**2 for factor in self.factors)


@dataclass(frozen=True)
class KronEigen:
    """Eigenbases of one layer's factors; eigenvalues clamped at zero."""

    factor: KronFactor
    A_values: np.ndarray
    A_vectors: np.ndarray
    G_values: np.ndarray
    G_vectors: np.ndarray

    @classmethod
    def of(cls, factor):
        a = LinearAlgebraService.eig_sym(factor.A_cov)
        g = LinearAlgebraService.eig_sym(factor.G_cov)
        return cls(
            factor=factor,
            A_values=np.maximum(a.values, 0.0),
            A_vectors=a.vectors,
            G_values=np.maximum(g.values, 0.0),
            G_vectors=g.vectors,
        )

    def precision_eigenvalues(self, n_data, prior_precision):
        """r×r grid of N·λᴬᵢ·λᴳⱼ + λ, row i for the input factor."""
        return n_data * np.outer(self.A_values, self.G_values) + prior_precision


@dataclass
class LaplacePosterior:
    theta_map: np.ndarray
    structure: Structure
    prior_precision: float
    curvature: object
    grid: list = field(default_factory=list)
    log_evidence: list = field(default_factory=list)
    eigen: list = field(default_factory=list)

    def __post_init__(self):
        self.theta_map = as_vector(self.theta_map, name="theta_map")
        self.structure = Structure(self.structure)
        if self.prior_precision <= 0:
            raise ValueError("prior precision must be positive")
        expected = CurvatureDiag if self.structure is Structure.DIAG else CurvatureKron
        if not isinstance(self.curvature, expected):
            raise ValueError(f"{self.structure.value} posterior needs {expected.__name__}")
        if self.curvature.dim != self.theta_map.shape[0]:
            raise ShapeError(
                f"curvature covers {self.curvature.dim} entries, "
                f"theta has {self.theta_map.shape[0]}"
            )
        if self.structure is Structure.KRON and not self.eigen:
            self.eigen = self.kron_eigen(self.curvature)

    @staticmethod
    def kron_eigen(curvature):
        return [KronEigen.of(factor) for factor in curvature.factors]

    @property
    def dim(self):
        return int(self.theta_map.shape[0])

    @property
    def n_data(self):
        return self.curvature.n_data

    def diag_variances(self):
        return 1.0 / (self.curvature.h + self.prior_precision)

    def kron_variances(self, eigen):
        """r×r posterior variances in the eigenbasis of one layer."""
        return 1.0 / eigen.precision_eigenvalues(self.n_data, self.prior_precision)
