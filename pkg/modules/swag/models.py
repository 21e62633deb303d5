"""
Models for the SWAG Module
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from modules.numerics.exceptions import ShapeError


@dataclass
class SwagCollector:
    """
    Running first and second moments of θ plus the last ``k`` deviations.

    Single-owner and mutable while the trajectory is being collected.
    """

    dim: int
    k: int
    count: int = 0
    mean: np.ndarray = None
    sq_mean: np.ndarray = None
    deviations: deque = None

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeError(f"dim must be positive, got {self.dim}")
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.sq_mean is None:
            self.sq_mean = np.zeros(self.dim)
        self.deviations = deque(self.deviations or (), maxlen=self.k)

    def deviation_matrix(self):
        """dim × min(count, k), oldest column first."""
        if not self.deviations:
            return np.zeros((self.dim, 0))
        return np.column_stack(list(self.deviations))


@dataclass(frozen=True)
class SwagPosterior:
    """Σ = ½(D Dᵀ + diag σ²) around μ."""

    mu: np.ndarray
    sigma2: np.ndarray
    D: np.ndarray
    k: int
    collected: int
    burn_in_epoch: int = None

    def __post_init__(self):
        dim = self.mu.shape[0]
        if self.sigma2.shape != (dim,) or self.D.shape[0] != dim:
            raise ShapeError("mu, sigma2 and D disagree on dim")
        if self.D.shape[1] > self.k:
            raise ShapeError(f"D holds {self.D.shape[1]} columns, window is {self.k}")

    @property
    def dim(self):
        return int(self.mu.shape[0])

    def covariance(self):
        return 0.5 * (self.D @ self.D.T + np.diag(self.sigma2))


@dataclass(frozen=True)
class SwagSettings:
    """SWAG phase of a run: collect once per epoch from the burn-in checkpoint."""

    burn_in_epoch: int
    k: int = 10
    collect_epochs: int = 10
    lr_ratio: float = 0.1
    samples: int = 15

    def __post_init__(self):
        if self.collect_epochs < 2:
            raise ValueError("SWAG needs at least two collected snapshots")


@dataclass
class SwagFit:
    """The posterior plus the burn-in network whose head and frozen parts every sample shares."""

    posterior: SwagPosterior
    collector: SwagCollector
    network: object = None
    trajectory: list = field(default_factory=list)
