"""
Models for the Predictive Module
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from modules.numerics.exceptions import ShapeError

SIMPLEX_TOLERANCE = 1e-9


class PosteriorKind(str, Enum):
    MAP = "map"
    SWAG = "swag"
    LAPLACE = "laplace"


class OodScore(str, Enum):
    TOTAL = "total"
    EPISTEMIC = "epistemic"


@dataclass(frozen=True)
class PointPosterior:
    """The MAP estimate seen as a posterior with zero covariance."""

    theta: np.ndarray

    @property
    def dim(self):
        return int(np.asarray(self.theta).shape[0])


@dataclass(frozen=True)
class PredictiveSamples:
    """Class probabilities of every posterior sample, N×S×C."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[1] < 1:
            raise ShapeError(f"expected N×S×C probabilities, got {probs.shape}")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=2) - 1.0) > SIMPLEX_TOLERANCE):
            raise ValueError("every probability row must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n_samples(self):
        return int(self.probs.shape[1])

    def mean_probs(self):
        return self.probs.mean(axis=1)

    def for_input(self, index):
        return self.probs[index]


@dataclass(frozen=True)
class UncertaintyTriple:
    """Entropies in nats: total = aleatoric + epistemic."""

    total: float
    aleatoric: float
    epistemic: float


@dataclass(frozen=True)
class EntropyArrays:
    """Per-input entropies, one entry per input row."""

    total: np.ndarray
    aleatoric: np.ndarray
    epistemic: np.ndarray

    def __len__(self):
        return int(self.total.shape[0])

    def score(self, kind):
        return self.epistemic if OodScore(kind) is OodScore.EPISTEMIC else self.total


@dataclass(frozen=True)
class ReliabilityBin:
    """Confidence interval (lower, upper]; accuracy and confidence are None when empty."""

    lower: float
    upper: float
    count: int
    accuracy: float = None
    confidence: float = None

    def as_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "count": self.count,
            "accuracy": self.accuracy,
            "confidence": self.confidence,
        }
