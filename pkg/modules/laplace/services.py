"""
Services for the Laplace Module

Everything is expressed over θ, the row-major concatenation of the adapted
cores. For one input and one adapted layer, the logit Jacobian row of class
c is ``kron(u, g_c)``: u is the core input x·A and g_c = scale·δ_c·Bᵀ is the
gradient of logit c at the core output.
"""

import logging
import math

import numpy as np
from django.conf import settings
from scipy.special import softmax

from modules.adapters.services import NetworkService, TrainingService
from modules.laplace.models import (
    CurvatureDiag,
    CurvatureKron,
    KronFactor,
    LaplacePosterior,
    Structure,
)
from modules.numerics.exceptions import NumericalError, ShapeError
from modules.numerics.models import as_matrix, as_vector

logger = logging.getLogger(__name__)

DENSE_LIMIT = 50
COVARIANCE_LIMIT = 2048


def _theta(theta):
    return as_vector(getattr(theta, "values", theta), name="theta")


def _batches(data, batch_size):
    for start in range(0, len(data), batch_size):
        yield data.features[start : start + batch_size]


def _core_gradients(net, cache):
    """Per adapted layer: core inputs u (N×r) and logit gradients g (C×N×r)."""
    logits = cache.outputs[-1]
    rows, classes = logits.shape
    seeds = np.zeros((classes, rows, classes))
    seeds[np.arange(classes), :, np.arange(classes)] = 1.0
    output_grads, _ = NetworkService.propagate(net, cache, seeds)
    pieces = []
    for piece in NetworkService.theta_layout(net):
        layer = net.layers[piece.layer_index]
        g = layer.scale * (output_grads[piece.layer_index] @ layer.B.T)
        pieces.append((piece, cache.core_inputs[piece.layer_index], g))
    return pieces


class LaplaceService:
    """Curvature, evidence, sampling and linearization around a MAP network."""

    @staticmethod
    def default_grid():
        grid = settings.SUBSPACE_BAYES["PRIOR_GRID"]
        return list(np.logspace(math.log10(grid["LOW"]), math.log10(grid["HIGH"]), grid["POINTS"]))

    @staticmethod
    def logit_jacobian(net, features):
        """Exact ∂logits/∂θ by the layerwise chain rule, N×C×|θ|."""
        logits, cache = NetworkService.forward(net, features)
        rows, classes = logits.shape
        blocks = [
            np.einsum("ni,cnj->ncij", u, g).reshape(rows, classes, piece.rank**2)
            for piece, u, g in _core_gradients(net, cache)
        ]
        if not blocks:
            return np.zeros((rows, classes, 0))
        return np.concatenate(blocks, axis=2)

    @staticmethod
    def logit_jacobian_fd(net, features, step=None):
        """Central finite differences over θ, one column per entry."""
        step = settings.SUBSPACE_BAYES["FINITE_DIFFERENCE_STEP"] if step is None else step
        features = as_matrix(features, name="features")
        theta = NetworkService.flatten(net).values
        columns = []
        for i in range(theta.shape[0]):
            shift = np.zeros_like(theta)
            shift[i] = step
            upper = NetworkService.logits_at(net, theta + shift, features)
            lower = NetworkService.logits_at(net, theta - shift, features)
            columns.append((upper - lower) / (2.0 * step))
        if not columns:
            return np.zeros((features.shape[0], net.n_classes, 0))
        return np.stack(columns, axis=2)

    @staticmethod
    def fit_ggn_diag(net, data, batch_size=256):
        """h = Σₙ diag(Jₙᵀ(diag(pₙ) − pₙpₙᵀ)Jₙ), summed over the dataset."""
        if not len(data):
            raise ValueError("curvature needs at least one data point")
        h = np.zeros(len(NetworkService.flatten(net)))
        for features in _batches(data, batch_size):
            jac = LaplaceService.logit_jacobian(net, features)
            probs = softmax(NetworkService.logits(net, features), axis=1)
            weighted = np.einsum("nc,ncd->nd", probs, jac)
            h += np.einsum("nc,ncd->d", probs, jac**2) - np.sum(weighted**2, axis=0)
        h = np.maximum(h, 0.0)
        logger.debug("GGN diagonal over %d rows, max %.3e", len(data), float(h.max(initial=0.0)))
        return CurvatureDiag(h=h, n_data=len(data))

    @staticmethod
    def ggn_dense(net, data, batch_size=256):
        """Full GGN Σₙ Jₙᵀ(diag(pₙ) − pₙpₙᵀ)Jₙ for small θ."""
        dim = len(NetworkService.flatten(net))
        if dim > DENSE_LIMIT:
            raise ShapeError(f"dense GGN is limited to {DENSE_LIMIT} entries, theta has {dim}")
        H = np.zeros((dim, dim))
        for features in _batches(data, batch_size):
            jac = LaplaceService.logit_jacobian(net, features)
            probs = softmax(NetworkService.logits(net, features), axis=1)
            weighted = np.einsum("nc,ncd->nd", probs, jac)
            H += np.einsum("ncd,nc,nce->de", jac, probs, jac) - weighted.T @ weighted
        return 0.5 * (H + H.T)

    @staticmethod
    def fit_kfac(net, data, batch_size=256):
        """
        Per adapted layer, A_cov = mean uuᵀ and G_cov = mean Σ_c p_c g̃_c g̃_cᵀ.

        g̃_c is the NLL gradient at the core output for label c, so the class
        sum is the model Fisher: Σ_c p_c g_c g_cᵀ − ḡḡᵀ with ḡ = Σ_c p_c g_c.
        """
        if not len(data):
            raise ValueError("curvature needs at least one data point")
        sums = {}
        for features in _batches(data, batch_size):
            logits, cache = NetworkService.forward(net, features)
            probs = softmax(logits, axis=1)
            for piece, u, g in _core_gradients(net, cache):
                mean_grad = np.einsum("nc,cni->ni", probs, g)
                a_sum, g_sum = sums.get(piece, (0.0, 0.0))
                sums[piece] = (
                    a_sum + u.T @ u,
                    g_sum + np.einsum("nc,cni,cnj->ij", probs, g, g) - mean_grad.T @ mean_grad,
                )
        factors = []
        for piece in NetworkService.theta_layout(net):
            a_sum, g_sum = sums[piece]
            a_cov, g_cov = a_sum / len(data), g_sum / len(data)
            factors.append(
                KronFactor(
                    layer_index=piece.layer_index,
                    start=piece.start,
                    stop=piece.stop,
                    A_cov=0.5 * (a_cov + a_cov.T),
                    G_cov=0.5 * (g_cov + g_cov.T),
                )
            )
        logger.debug("KFAC factors for %d layers over %d rows", len(factors), len(data))
        return CurvatureKron(factors=factors, n_data=len(data))

    @staticmethod
    def precision_eigenvalues(curvature, prior_precision, eigen=None):
        """Eigenvalues of H + λI as one vector in θ order."""
        if isinstance(curvature, CurvatureDiag):
            return curvature.h + prior_precision
        if eigen is None:
            eigen = LaplacePosterior.kron_eigen(curvature)
        return np.concatenate(
            [e.precision_eigenvalues(curvature.n_data, prior_precision).reshape(-1) for e in eigen]
        )

    @staticmethod
    def log_marginal_likelihood(curvature, theta_map, data_nll, prior_precision, eigen=None):
        """
        log Z(λ) = −N·nll − ½λ‖θ‖² + (dim/2)·ln λ − ½·ln det(H + λI)
        """
        if prior_precision <= 0:
            raise ValueError(f"prior precision must be positive, got {prior_precision}")
        theta = _theta(theta_map)
        if theta.shape[0] != curvature.dim:
            raise ShapeError(
                f"theta has {theta.shape[0]} entries, curvature covers {curvature.dim}"
            )
        eigenvalues = LaplaceService.precision_eigenvalues(curvature, prior_precision, eigen)
        return float(
            -curvature.n_data * data_nll
            - 0.5 * prior_precision * float(theta @ theta)
            + 0.5 * theta.shape[0] * math.log(prior_precision)
            - 0.5 * float(np.sum(np.log(eigenvalues)))
        )

    @staticmethod
    def evidence_curve(curvature, theta_map, data_nll, grid):
        if not len(grid):
            raise ValueError("prior precision grid is empty")
        if any(value <= 0 for value in grid):
            raise ValueError("prior precision grid must be positive")
        eigen = None
        if isinstance(curvature, CurvatureKron):
            eigen = LaplacePosterior.kron_eigen(curvature)
        return [
            (float(value), LaplaceService.log_marginal_likelihood(
                curvature, theta_map, data_nll, value, eigen
            ))
            for value in sorted(grid)
        ]

    @staticmethod
    def tune_prior_precision(curvature, theta_map, data_nll, grid=None):
        """Grid argmax of log Z; ties go to the smaller λ."""
        grid = LaplaceService.default_grid() if grid is None else grid
        best, best_score = None, -math.inf
        for value, score in LaplaceService.evidence_curve(curvature, theta_map, data_nll, grid):
            if score > best_score:
                best, best_score = value, score
        if best is None:
            raise NumericalError("log marginal likelihood is not finite anywhere on the grid")
        return best

    @staticmethod
    def fit(net, data, structure=Structure.KRON, grid=None, batch_size=256):
        """Curvature at ``net``, λ tuned by evidence, and the resulting posterior."""
        structure = Structure(structure)
        grid = LaplaceService.default_grid() if grid is None else list(grid)
        if structure is Structure.DIAG:
            curvature = LaplaceService.fit_ggn_diag(net, data, batch_size)
        else:
            curvature = LaplaceService.fit_kfac(net, data, batch_size)
        theta = NetworkService.flatten(net).values.copy()
        data_nll, _ = TrainingService.evaluate(net, data)
        curve = LaplaceService.evidence_curve(curvature, theta, data_nll, grid)
        prior_precision = LaplaceService.tune_prior_precision(curvature, theta, data_nll, grid)
        logger.info(
            "%s Laplace over %d cores: lambda=%.4g (NLL %.5f on %d rows)",
            structure.value,
            theta.shape[0],
            prior_precision,
            data_nll,
            len(data),
        )
        return LaplacePosterior(
            theta_map=theta,
            structure=structure,
            prior_precision=prior_precision,
            curvature=curvature,
            grid=[value for value, _ in curve],
            log_evidence=[score for _, score in curve],
        )

    @staticmethod
    def sample(posterior, rng):
        """One θ draw with covariance (H + λI)⁻¹."""
        z = rng.standard_normal(posterior.dim)
        if posterior.structure is Structure.DIAG:
            return posterior.theta_map + z * np.sqrt(posterior.diag_variances())
        theta = posterior.theta_map.copy()
        for eigen in posterior.eigen:
            factor = eigen.factor
            scaled = z[factor.start : factor.stop].reshape(factor.rank, factor.rank)
            scaled = scaled * np.sqrt(posterior.kron_variances(eigen))
            update = eigen.A_vectors @ scaled @ eigen.G_vectors.T
            theta[factor.start : factor.stop] += update.reshape(-1)
        return theta

    @staticmethod
    def covariance(posterior):
        """Dense (H + λI)⁻¹, block-diagonal across layers for KRON."""
        if posterior.dim > COVARIANCE_LIMIT:
            raise ShapeError(f"dense covariance is limited to {COVARIANCE_LIMIT} entries")
        if posterior.structure is Structure.DIAG:
            return np.diag(posterior.diag_variances())
        sigma = np.zeros((posterior.dim, posterior.dim))
        for eigen in posterior.eigen:
            factor = eigen.factor
            basis = np.kron(eigen.A_vectors, eigen.G_vectors)
            variances = posterior.kron_variances(eigen)
            sigma[factor.start : factor.stop, factor.start : factor.stop] = (
                basis * variances.reshape(-1)
            ) @ basis.T
        return sigma

    @staticmethod
    def project_covariance(posterior, jac):
        """J Σ Jᵀ for J of shape …×C×|θ| using the structured Σ."""
        if jac.shape[-1] != posterior.dim:
            raise ShapeError(
                f"Jacobian covers {jac.shape[-1]} entries, posterior has {posterior.dim}"
            )
        if posterior.structure is Structure.DIAG:
            variances = posterior.diag_variances()
            cov = np.einsum("...cd,d,...ed->...ce", jac, variances, jac)
        else:
            cov = np.zeros(jac.shape[:-1] + (jac.shape[-2],))
            for eigen in posterior.eigen:
                factor = eigen.factor
                block = jac[..., factor.start : factor.stop].reshape(
                    jac.shape[:-1] + (factor.rank, factor.rank)
                )
                rotated = np.einsum("ai,...cab,bj->...cij", eigen.A_vectors, block, eigen.G_vectors)
                variances = posterior.kron_variances(eigen)
                cov += np.einsum("...cij,ij,...eij->...ce", rotated, variances, rotated)
        return 0.5 * (cov + np.swapaxes(cov, -1, -2))

    @staticmethod
    def linearized_logit_covs(net, posterior, features):
        """Mean logits N×C and Λ = JΣJᵀ per input, N×C×C."""
        logits = NetworkService.logits(net, features)
        jac = LaplaceService.logit_jacobian(net, features)
        return logits, LaplaceService.project_covariance(posterior, jac)

    @staticmethod
    def linearized_logit_cov(net, posterior, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[0] != 1:
            raise ShapeError(f"expected a single input, got {x.shape[0]} rows")
        logits, covs = LaplaceService.linearized_logit_covs(net, posterior, x)
        return logits[0], covs[0]

    @staticmethod
    def covariance_roots(covs):
        """Per-input L with L·Lᵀ = Λ, negative eigenvalues clamped."""
        values, vectors = np.linalg.eigh(covs)
        return vectors * np.sqrt(np.maximum(values, 0.0))[..., None, :]

    @staticmethod
    def draw_logits(logits, roots, rng):
        z = rng.standard_normal(logits.shape)
        return logits + np.einsum("nce,ne->nc", roots, z)

    @staticmethod
    def sample_linearized_logits(net, posterior, features, samples, rng):
        """S×N×C logits drawn from N(f_MAP(x), Λ(x)) for each input."""
        logits, covs = LaplaceService.linearized_logit_covs(net, posterior, features)
        roots = LaplaceService.covariance_roots(covs)
        return np.stack([LaplaceService.draw_logits(logits, roots, rng) for _ in range(samples)])
