"""
Services for the Projections Module

Builders return the frozen pair (A, B) only. With R = I the product A·B is
each scheme's rank-r approximation of W0; the trainable core starts at zero
in the adapter layer.
"""

import logging

import numpy as np
from django.conf import settings
from scipy.fft import dct

from modules.numerics.exceptions import RankDeficiencyError, ShapeError
from modules.numerics.models import SeededRng, as_matrix
from modules.numerics.services import LinearAlgebraService, RandomService
from modules.projections.models import ProjectionKind, ProjectionPair, ProjectionSpec

logger = logging.getLogger(__name__)

RETRY_SUB_SEED = 0x9E3779B97F4A7C15
DENSE_COVARIANCE_LIMIT = 4096


def _check_rank(W0, rank):
    limit = min(W0.shape)
    if not 1 <= rank <= limit:
        raise ShapeError(f"rank must be in [1, {limit}] for W0 {W0.shape}, got {rank}")


def _top_indices(energy, count):
    """Indices of the ``count`` largest energies, lower index first on ties, sorted."""
    order = np.argsort(-energy, kind="stable")
    return np.sort(order[:count])


def _l1_order(W0, axis):
    """Descending L1-norm order of rows (axis=1) or columns (axis=0)."""
    return np.argsort(-np.sum(np.abs(W0), axis=axis), kind="stable")


class DctService:
    """Orthonormal DCT-II bases."""

    @staticmethod
    def matrix(dim):
        """D with D[k, j] = α_k cos(π(2j+1)k / 2d); rows are frequencies."""
        if dim < 1:
            raise ShapeError(f"DCT dimension must be positive, got {dim}")
        return dct(np.eye(dim), type=2, norm="ortho", axis=0)

    @staticmethod
    def coefficients(W):
        W = as_matrix(W, name="W")
        return DctService.matrix(W.shape[0]) @ W @ DctService.matrix(W.shape[1]).T


class ProjectionService:
    """Builders for every projection scheme plus reconstruction diagnostics."""

    @staticmethod
    def default_ridge(sigma_xx):
        sigma_xx = as_matrix(sigma_xx, name="sigma_xx")
        scale = settings.SUBSPACE_BAYES["WSVD_RIDGE_SCALE"]
        return scale * float(np.trace(sigma_xx)) / sigma_xx.shape[0]

    @staticmethod
    def build_svd(W0, rank):
        """A = U_r diag(S_r), B = V_rᵀ."""
        W0 = as_matrix(W0, name="W0")
        _check_rank(W0, rank)
        result = LinearAlgebraService.svd(W0).truncate(rank)
        return ProjectionPair(
            A=result.U * result.S, B=result.V.T.copy(), kind=ProjectionKind.SVD, rank=rank
        )

    @staticmethod
    def build_wsvd(W0, sigma_xx, rank, ridge=None):
        """
        Whitened SVD: the rank-r Ŵ = AB minimizing E‖x(W0 − Ŵ)‖² for inputs
        with uncentered second moment ``sigma_xx``.
        """
        W0 = as_matrix(W0, name="W0")
        sigma_xx = as_matrix(sigma_xx, name="sigma_xx")
        _check_rank(W0, rank)
        if sigma_xx.shape != (W0.shape[0], W0.shape[0]):
            raise ShapeError(
                f"sigma_xx must be {W0.shape[0]}×{W0.shape[0]}, got {sigma_xx.shape}"
            )
        if ridge is None:
            ridge = ProjectionService.default_ridge(sigma_xx)
        whitener, inverse_whitener = LinearAlgebraService.psd_sqrt_and_invsqrt(
            sigma_xx, ridge=ridge
        )
        whitened = LinearAlgebraService.svd(W0.T @ whitener).truncate(rank)
        A = inverse_whitener @ (whitened.V * whitened.S)
        B = whitened.U.T.copy()
        logger.debug("WSVD rank %d with ridge %.3e", rank, ridge)
        return ProjectionPair(
            A=A, B=B, kind=ProjectionKind.WSVD, rank=rank, meta={"ridge": float(ridge)}
        )

    @staticmethod
    def build_dct(W0, rank, permute=True):
        """Keep the top-r row and column frequencies of the 2-D DCT of W0."""
        W0 = as_matrix(W0, name="W0")
        _check_rank(W0, rank)
        n, m = W0.shape
        if permute:
            row_order = _l1_order(W0, axis=1)
            col_order = _l1_order(W0, axis=0)
        else:
            row_order = np.arange(n)
            col_order = np.arange(m)
        sorted_w = W0[row_order][:, col_order]

        d_n = DctService.matrix(n)
        d_m = DctService.matrix(m)
        coefficients = d_n @ sorted_w @ d_m.T
        rows = _top_indices(np.sum(coefficients**2, axis=1), rank)
        cols = _top_indices(np.sum(coefficients**2, axis=0), rank)
        core = coefficients[np.ix_(rows, cols)]

        A = np.empty((n, rank))
        B = np.empty((rank, m))
        A[row_order] = d_n.T[:, rows] @ core
        B[:, col_order] = d_m[cols, :]
        meta = {
            "permute": bool(permute),
            "row_indices": rows.tolist(),
            "col_indices": cols.tolist(),
            "row_order": row_order.tolist(),
            "col_order": col_order.tolist(),
        }
        return ProjectionPair(A=A, B=B, kind=ProjectionKind.DCT, rank=rank, meta=meta)

    @staticmethod
    def haar_frame(rng, rows, cols):
        """Orthonormal n×r frame from QR of a Gaussian, diag(R) made non-negative."""
        gaussian = RandomService.standard_normal(rng, rows, cols)
        qr = LinearAlgebraService.qr_thin(gaussian)
        signs = np.sign(np.diag(qr.R))
        signs[signs == 0] = 1.0
        return qr.Q * signs

    @staticmethod
    def build_random(W0, rank, seed):
        """Haar-random L, R_temp; A = L·(Lᵀ W0 R_temp), B = R_tempᵀ."""
        W0 = as_matrix(W0, name="W0")
        _check_rank(W0, rank)
        n, m = W0.shape
        rng = SeededRng(seed)
        try:
            left = ProjectionService.haar_frame(rng, n, rank)
            right = ProjectionService.haar_frame(rng, m, rank)
            effective_seed = rng.seed
        except RankDeficiencyError:
            retry = rng.spawn(RETRY_SUB_SEED)
            logger.warning("RAND draw for seed %d was rank deficient, retrying", seed)
            left = ProjectionService.haar_frame(retry, n, rank)
            right = ProjectionService.haar_frame(retry, m, rank)
            effective_seed = retry.seed
        core = left.T @ W0 @ right
        return ProjectionPair(
            A=left @ core,
            B=right.T.copy(),
            kind=ProjectionKind.RAND,
            rank=rank,
            meta={"seed": int(seed), "effective_seed": int(effective_seed)},
        )

    @staticmethod
    def build_hybrid(
        W0, rank, first, second, sigma_xx=None, seed=0, permute=True, ridge=None
    ):
        """Half of the basis from each kind, concatenated without re-orthogonalization."""
        W0 = as_matrix(W0, name="W0")
        _check_rank(W0, rank)
        if rank % 2:
            raise ShapeError(f"hybrid rank must be even, got {rank}")
        kinds = [ProjectionKind(first), ProjectionKind(second)]
        if ProjectionKind.HYBRID in kinds:
            raise ValueError("hybrid components must be base kinds")
        if kinds[0] is kinds[1]:
            logger.warning(
                "hybrid of %s with itself duplicates its basis", kinds[0].value
            )
        halves = [
            ProjectionService._build_base(
                kind,
                W0,
                rank // 2,
                sigma_xx=sigma_xx,
                seed=RandomService.sub_seed(seed, index),
                permute=permute,
                ridge=ridge,
            )
            for index, kind in enumerate(kinds)
        ]
        return ProjectionPair(
            A=np.hstack([half.A for half in halves]),
            B=np.vstack([half.B for half in halves]),
            kind=ProjectionKind.HYBRID,
            rank=rank,
            meta={
                "components": [kind.value for kind in kinds],
                "component_meta": [half.meta for half in halves],
            },
        )

    @staticmethod
    def _build_base(kind, W0, rank, sigma_xx=None, seed=0, permute=True, ridge=None):
        if kind is ProjectionKind.SVD:
            return ProjectionService.build_svd(W0, rank)
        if kind is ProjectionKind.WSVD:
            if sigma_xx is None:
                raise ValueError("WSVD needs the input second moment sigma_xx")
            return ProjectionService.build_wsvd(W0, sigma_xx, rank, ridge=ridge)
        if kind is ProjectionKind.DCT:
            return ProjectionService.build_dct(W0, rank, permute=permute)
        if kind is ProjectionKind.RAND:
            return ProjectionService.build_random(W0, rank, seed)
        raise ValueError(f"unknown projection kind {kind}")

    @staticmethod
    def build(W0, spec: ProjectionSpec, sigma_xx=None):
        """Dispatch on ``spec.kind``."""
        if spec.kind is ProjectionKind.HYBRID:
            first, second = spec.components
            return ProjectionService.build_hybrid(
                W0,
                spec.rank,
                first,
                second,
                sigma_xx=sigma_xx,
                seed=spec.seed,
                permute=spec.permute,
                ridge=spec.ridge,
            )
        return ProjectionService._build_base(
            spec.kind,
            as_matrix(W0, name="W0"),
            spec.rank,
            sigma_xx=sigma_xx,
            seed=spec.seed,
            permute=spec.permute,
            ridge=spec.ridge,
        )

    @staticmethod
    def recon_error(W0, pair):
        """‖W0 − AB‖_F."""
        W0 = as_matrix(W0, name="W0")
        if W0.shape != (pair.n, pair.m):
            raise ShapeError(f"pair is {pair.n}×{pair.m}, W0 is {W0.shape}")
        return float(np.linalg.norm(W0 - pair.product()))

    @staticmethod
    def activation_error(W0, pair, sigma_xx):
        """tr((W0−AB)ᵀ Σ_xx (W0−AB)) = E‖x(W0 − AB)‖²."""
        W0 = as_matrix(W0, name="W0")
        sigma_xx = as_matrix(sigma_xx, name="sigma_xx")
        if W0.shape != (pair.n, pair.m):
            raise ShapeError(f"pair is {pair.n}×{pair.m}, W0 is {W0.shape}")
        if sigma_xx.shape != (pair.n, pair.n):
            raise ShapeError(f"sigma_xx must be {pair.n}×{pair.n}, got {sigma_xx.shape}")
        residual = W0 - pair.product()
        return max(0.0, float(np.sum(residual * (sigma_xx @ residual))))

    @staticmethod
    def lift_matrix(pair, scale=1.0):
        """
        K with vec(scale·A R B) = K vec(R), both vecs row-major: K = scale·(A ⊗ Bᵀ).

        This is the row-major form of the column-major ``Bᵀ ⊗ A`` lift.
        """
        return scale * np.kron(pair.A, pair.B.T)

    @staticmethod
    def delta_w_covariance(pair, sigma_core, scale=1.0):
        """Covariance of vec(ΔW) (nm×nm, row-major) implied by Cov(vec R)."""
        sigma_core = as_matrix(sigma_core, name="sigma_core")
        r2 = pair.rank**2
        if sigma_core.shape != (r2, r2):
            raise ShapeError(f"sigma_core must be {r2}×{r2}, got {sigma_core.shape}")
        if pair.n * pair.m > DENSE_COVARIANCE_LIMIT:
            raise ShapeError(
                f"dense ΔW covariance is limited to n·m ≤ {DENSE_COVARIANCE_LIMIT}"
            )
        lift = ProjectionService.lift_matrix(pair, scale)
        covariance = lift @ sigma_core @ lift.T
        return 0.5 * (covariance + covariance.T)

    @staticmethod
    def subspace_basis(pairs, scales):
        """Block-diagonal basis mapping θ to the stacked row-major vec(ΔW_ℓ)."""
        blocks = [
            ProjectionService.lift_matrix(pair, scale) for pair, scale in zip(pairs, scales)
        ]
        rows = sum(block.shape[0] for block in blocks)
        cols = sum(block.shape[1] for block in blocks)
        if rows * cols > DENSE_COVARIANCE_LIMIT**2:
            raise ShapeError("subspace basis too large to materialize")
        basis = np.zeros((rows, cols))
        row, col = 0, 0
        for block in blocks:
            basis[row : row + block.shape[0], col : col + block.shape[1]] = block
            row += block.shape[0]
            col += block.shape[1]
        return basis

    @staticmethod
    def reconstruction_report(W0, ranks, kinds=None, sigma_xx=None, seed=0):
        """Recon and activation errors for every base builder at every rank."""
        W0 = as_matrix(W0, name="W0")
        kinds = [ProjectionKind(k) for k in (kinds or ProjectionKind.base_choices())]
        rows = []
        for kind in kinds:
            if kind is ProjectionKind.WSVD and sigma_xx is None:
                logger.info("skipping WSVD in report: no sigma_xx given")
                continue
            for rank in ranks:
                pair = ProjectionService._build_base(
                    kind, W0, rank, sigma_xx=sigma_xx, seed=seed
                )
                row = {
                    "kind": kind.value,
                    "rank": rank,
                    "recon_error": ProjectionService.recon_error(W0, pair),
                }
                if sigma_xx is not None:
                    row["activation_error"] = ProjectionService.activation_error(
                        W0, pair, sigma_xx
                    )
                rows.append(row)
        return rows
