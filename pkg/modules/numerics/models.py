"""
Models for the Numerics Module

Value types returned by the decompositions, the Welford second-moment
accumulator and the seeded random stream. A matrix is a 2-D float64
``numpy.ndarray``; ``as_matrix`` is the single entry point that checks it.
"""

from dataclasses import dataclass, field

import numpy as np

from modules.numerics.exceptions import NumericalError, ShapeError

UINT64_LIMIT = 2**64


def as_matrix(data, name="matrix", allow_empty=False):
    """Return ``data`` as a finite 2-D float64 array or raise."""
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {matrix.shape}")
    if not allow_empty and matrix.size == 0:
        raise ShapeError(f"{name} must be non-empty, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"{name} has non-finite entries")
    return matrix


def as_vector(data, name="vector"):
    """Return ``data`` as a finite 1-D float64 array or raise."""
    vector = np.asarray(data, dtype=np.float64)
    if vector.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise NumericalError(f"{name} has non-finite entries")
    return vector


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = U diag(S) Vᵀ`` with k = min(rows, cols)."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def k(self):
        return int(self.S.shape[0])

    def truncate(self, rank):
        if not 1 <= rank <= self.k:
            raise ShapeError(f"rank must be in [1, {self.k}], got {rank}")
        return SvdResult(
            U=self.U[:, :rank], S=self.S[:rank], V=self.V[:, :rank]
        )

    def reconstruct(self, rank=None):
        part = self if rank is None else self.truncate(rank)
        return (part.U * part.S) @ part.V.T


@dataclass(frozen=True)
class QrResult:
    """Thin QR ``M = Q R`` with orthonormal Q (n×r) and upper-triangular R."""

    Q: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class SymEigResult:
    """Symmetric eigendecomposition, eigenvalues in descending order."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


@dataclass
class WelfordState:
    """
    Running uncentered second moment ``E[xᵀx]`` of row vectors.

    ``moment2`` is kept as a running mean (not a running sum), updated one
    batch at a time so memory stays at dim×dim regardless of data size.
    """

    dim: int
    count: int = 0
    moment2: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeError(f"dim must be positive, got {self.dim}")
        if self.moment2 is None:
            self.moment2 = np.zeros((self.dim, self.dim))


class SeededRng:
    """
    Seeded random stream.

    The bit generator is numpy's PCG64 seeded through ``SeedSequence(seed)``,
    which is what ``numpy.random.default_rng(seed)`` builds. The algorithm and
    its constants are fixed by numpy, so a seed reproduces the same stream on
    every platform; ``tests/data/rng_seed0_uniform.json`` pins the first draws.
    """

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < UINT64_LIMIT:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"

    def spawn(self, index):
        """Independent sub-stream ``seed XOR index``."""
        return SeededRng(self.seed ^ int(index))

    def uniform(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)
