"""
Services for the Numerics Module

Decompositions with a deterministic sign convention, the Welford
second-moment update and seeded Gaussian draws.
"""

import logging

import numpy as np

from modules.numerics.exceptions import (
    ConvergenceError,
    NumericalError,
    RankDeficiencyError,
    ShapeError,
)
from modules.numerics.models import (
    QrResult,
    SvdResult,
    SymEigResult,
    WelfordState,
    as_matrix,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-10
QR_PIVOT_FLOOR = 1e-12


def _largest_entry_positive(vectors, partner=None):
    """Flip columns so each column's largest-magnitude entry is positive."""
    vectors = vectors.copy()
    partner = None if partner is None else partner.copy()
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors *= signs
    if partner is not None:
        partner *= signs
    return vectors, partner


class LinearAlgebraService:
    """Dense decompositions (LAPACK through numpy) with reproducible signs."""

    @staticmethod
    def svd(matrix):
        """Thin SVD; each column of U has its largest-magnitude entry positive."""
        matrix = as_matrix(matrix)
        try:
            u, s, vh = np.linalg.svd(matrix, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD did not converge: {exc}") from exc
        u, v = _largest_entry_positive(u, vh.T)
        return SvdResult(U=u, S=np.maximum(s, 0.0), V=v)

    @staticmethod
    def qr_thin(matrix):
        """Householder thin QR. Signs are left as LAPACK produces them."""
        matrix = as_matrix(matrix)
        rows, cols = matrix.shape
        if rows < cols:
            raise ShapeError(f"qr_thin needs rows >= cols, got {matrix.shape}")
        q, r = np.linalg.qr(matrix, mode="reduced")
        smallest = float(np.min(np.abs(np.diag(r))))
        if smallest < QR_PIVOT_FLOOR:
            raise RankDeficiencyError(
                f"rank-deficient input: smallest |R_ii| = {smallest:.3e}"
            )
        return QrResult(Q=q, R=r)

    @staticmethod
    def eig_sym(matrix):
        """Eigendecomposition of a symmetric matrix, values descending."""
        matrix = as_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ShapeError(f"eig_sym needs a square matrix, got {matrix.shape}")
        scale = max(1.0, float(np.max(np.abs(matrix))))
        asymmetry = float(np.max(np.abs(matrix - matrix.T)))
        if asymmetry > SYMMETRY_TOLERANCE * scale:
            raise ValueError(f"matrix is not symmetric (max |M - Mᵀ| = {asymmetry:.3e})")
        symmetric = 0.5 * (matrix + matrix.T)
        try:
            values, vectors = np.linalg.eigh(symmetric)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"eigh did not converge: {exc}") from exc
        values = values[::-1].copy()
        vectors, _ = _largest_entry_positive(vectors[:, ::-1])
        return SymEigResult(values=values, vectors=vectors)

    @staticmethod
    def psd_sqrt_and_invsqrt(matrix, ridge=0.0):
        """Return ``(M + ridge I)^{1/2}`` and its inverse through one eig_sym."""
        if ridge < 0:
            raise ValueError(f"ridge must be non-negative, got {ridge}")
        eig = LinearAlgebraService.eig_sym(matrix)
        shifted = eig.values + ridge
        if np.any(shifted <= 0):
            raise NumericalError(
                f"matrix + ridge is not positive definite (min eigenvalue "
                f"{float(np.min(shifted)):.3e})"
            )
        root = np.sqrt(shifted)
        q = eig.vectors
        return (q * root) @ q.T, (q / root) @ q.T


class WelfordService:
    """Batched running uncentered second moment."""

    @staticmethod
    def update(state, batch):
        """Absorb an N×dim batch into ``state`` (mutated and returned)."""
        batch = as_matrix(batch, name="batch")
        if batch.shape[1] != state.dim:
            raise ShapeError(
                f"batch has {batch.shape[1]} columns, accumulator dim is {state.dim}"
            )
        n_batch = batch.shape[0]
        total = state.count + n_batch
        batch_moment = (batch.T @ batch) / n_batch
        moment2 = state.moment2 + (batch_moment - state.moment2) * (n_batch / total)
        state.moment2 = 0.5 * (moment2 + moment2.T)
        state.count = total
        return state

    @staticmethod
    def finalize(state):
        """``(1/count) Σ xᵀx`` over every absorbed row."""
        if state.count < 1:
            raise ValueError("cannot finalize an empty accumulator")
        return state.moment2.copy()

    @staticmethod
    def from_batches(batches, dim):
        state = WelfordState(dim=dim)
        for batch in batches:
            WelfordService.update(state, batch)
        return state


class RandomService:
    """Draws from a SeededRng."""

    @staticmethod
    def standard_normal(rng, rows, cols):
        return rng.standard_normal((rows, cols))

    @staticmethod
    def sub_seed(seed, index):
        return int(seed) ^ int(index)
