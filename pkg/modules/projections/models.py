"""
Models for the Projections Module
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from modules.numerics.exceptions import ShapeError
from modules.numerics.models import as_matrix


class ProjectionKind(str, Enum):
    SVD = "SVD"
    WSVD = "WSVD"
    DCT = "DCT"
    RAND = "RAND"
    HYBRID = "HYBRID"

    @classmethod
    def choices(cls):
        return [kind.value for kind in cls]

    @classmethod
    def base_choices(cls):
        return [kind.value for kind in cls if kind is not cls.HYBRID]


@dataclass(frozen=True)
class ProjectionSpec:
    """How to build a pair. ``components`` names the two halves of a HYBRID."""

    kind: ProjectionKind
    rank: int
    seed: int = 0
    permute: bool = True
    ridge: float = None
    whitening_source: str = None
    components: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ProjectionKind(self.kind))
        object.__setattr__(
            self, "components", tuple(ProjectionKind(c) for c in self.components)
        )
        if self.rank < 1:
            raise ValueError(f"rank must be at least 1, got {self.rank}")
        if self.kind is ProjectionKind.HYBRID and len(self.components) != 2:
            raise ValueError("a HYBRID spec names exactly two component kinds")

    @property
    def needs_whitening(self):
        return ProjectionKind.WSVD in (self.kind, *self.components)


@dataclass(frozen=True)
class ProjectionPair:
    """
    Frozen bases A (n×r) and B (r×m) spanning the update ΔW = A R B.

    ``meta`` carries provenance: DCT index sets and L1 orders, the RAND
    seed, the WSVD ridge, HYBRID component metadata.
    """

    A: np.ndarray
    B: np.ndarray
    kind: ProjectionKind
    rank: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = as_matrix(self.A, name="A")
        b = as_matrix(self.B, name="B")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "kind", ProjectionKind(self.kind))
        if a.shape[1] != self.rank or b.shape[0] != self.rank:
            raise ShapeError(
                f"A {a.shape} and B {b.shape} do not share inner dimension {self.rank}"
            )
        if self.rank > min(a.shape[0], b.shape[1]):
            raise ShapeError(
                f"rank {self.rank} exceeds min(n, m) = {min(a.shape[0], b.shape[1])}"
            )

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def product(self, core=None):
        """A·B, or A·R·B when a core is given."""
        if core is None:
            return self.A @ self.B
        return self.A @ core @ self.B
