"""
Unit tests for Laplace curvature, evidence, sampling and linearization.
"""

import math
import tempfile

import numpy as np
import pytest
from django.test import SimpleTestCase

from modules.adapters.factories import AdaptedNetworkFactory, gaussian_classes
from modules.adapters.models import AdaptedLinear, Dataset, Network
from modules.adapters.services import NetworkService
from modules.laplace.factories import (
    CurvatureDiagFactory,
    KronFactorFactory,
    LaplacePosteriorFactory,
    kron_curvature,
)
from modules.laplace.models import CurvatureDiag, LaplacePosterior, Structure
from modules.laplace.services import LaplaceService
from modules.laplace.storage import LaplaceStore
from modules.numerics.exceptions import ShapeError
from modules.numerics.models import SeededRng
from modules.projections.models import ProjectionKind, ProjectionPair
from modules.projections.services import ProjectionService


def linear_softmax_net(W0, rank, R=None, scale=1.0):
    """A single adapted layer feeding softmax: logits are linear in θ."""
    pair = ProjectionService.build_svd(W0, rank)
    return Network(
        layers=[
            AdaptedLinear(
                name="head",
                W0=W0,
                bias=np.zeros(W0.shape[1]),
                pair=pair,
                R=np.zeros((rank, rank)) if R is None else R,
                scale=scale,
            )
        ],
        n_classes=W0.shape[1],
    )


def total_nll(net, theta, data):
    logits = NetworkService.logits_at(net, theta, data.features)
    return len(data) * NetworkService.loss_nll(logits, data.labels)


def one_layer_net(seed=7):
    return AdaptedNetworkFactory(hidden=(6,), n_classes=3, rank=2, core_scale=0.3, seed=seed)


@pytest.mark.unit
class TestJacobian(SimpleTestCase):
    def setUp(self):
        self.features = SeededRng(3).standard_normal((5, 2))

    def test_exact_matches_finite_differences(self):
        net = AdaptedNetworkFactory(core_scale=0.3)

        exact = LaplaceService.logit_jacobian(net, self.features)
        reference = LaplaceService.logit_jacobian_fd(net, self.features)

        assert exact.shape == (5, 3, len(NetworkService.flatten(net)))
        np.testing.assert_allclose(exact, reference, atol=1e-6)

    def test_relu_network_matches_finite_differences(self):
        net = AdaptedNetworkFactory(activation="relu", core_scale=0.3, seed=41)

        np.testing.assert_allclose(
            LaplaceService.logit_jacobian(net, self.features),
            LaplaceService.logit_jacobian_fd(net, self.features),
            atol=1e-6,
        )

    def test_row_is_kron_of_core_input_and_output_gradient(self):
        W0 = SeededRng(2).standard_normal((3, 3))
        net = linear_softmax_net(W0, 2, scale=0.5)
        x = self.features[:1] @ np.ones((2, 3))
        layer = net.layers[0]

        jac = LaplaceService.logit_jacobian(net, x)

        u = (x @ layer.A)[0]
        for c in range(3):
            g = layer.scale * layer.B[:, c]
            np.testing.assert_allclose(jac[0, c], np.kron(u, g), atol=1e-14)


@pytest.mark.unit
class TestGgnDiag(SimpleTestCase):
    def setUp(self):
        rng = SeededRng(11)
        self.W0 = rng.standard_normal((3, 3))
        self.net = linear_softmax_net(self.W0, 2, R=0.2 * rng.standard_normal((2, 2)))
        self.data = Dataset(features=rng.standard_normal((6, 3)), labels=[0, 1, 2, 0, 1, 2])

    def test_saturated_predictions_have_no_curvature(self):
        W0 = 100.0 * np.array([[1.0, -1.0], [1.0, -1.0]])
        net = linear_softmax_net(W0, 1)
        data = Dataset(features=np.ones((4, 2)), labels=[0, 0, 0, 0])

        curvature = LaplaceService.fit_ggn_diag(net, data)

        np.testing.assert_allclose(curvature.h, 0.0, atol=1e-8)

    def test_equals_hessian_diagonal_for_linear_logits(self):
        theta = NetworkService.flatten(self.net).values
        step = 1e-4
        centre = total_nll(self.net, theta, self.data)
        expected = []
        for i in range(theta.shape[0]):
            shift = np.zeros_like(theta)
            shift[i] = step
            upper = total_nll(self.net, theta + shift, self.data)
            lower = total_nll(self.net, theta - shift, self.data)
            expected.append((upper - 2.0 * centre + lower) / step**2)

        curvature = LaplaceService.fit_ggn_diag(self.net, self.data)

        np.testing.assert_allclose(curvature.h, expected, rtol=1e-3, atol=1e-6)

    def test_duplicated_data_doubles_h(self):
        doubled = Dataset(
            features=np.vstack([self.data.features, self.data.features]),
            labels=np.concatenate([self.data.labels, self.data.labels]),
        )

        single = LaplaceService.fit_ggn_diag(self.net, self.data)
        double = LaplaceService.fit_ggn_diag(self.net, doubled)

        np.testing.assert_allclose(double.h, 2.0 * single.h, rtol=1e-12)
        assert double.n_data == 12

    def test_is_diagonal_of_dense_ggn_on_a_hidden_layer_net(self):
        net = AdaptedNetworkFactory(core_scale=0.2, seed=5)
        data = gaussian_classes(5, rows=20, means=((-1.0, 0.0), (1.0, 0.0), (0.0, 1.5)))

        dense = LaplaceService.ggn_dense(net, data, batch_size=16)
        curvature = LaplaceService.fit_ggn_diag(net, data, batch_size=16)

        np.testing.assert_allclose(curvature.h, np.diag(dense), rtol=1e-10, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(dense)) >= -1e-10

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            LaplaceService.fit_ggn_diag(self.net, self.data.subset(np.array([], dtype=int)))


@pytest.mark.unit
class TestKfac(SimpleTestCase):
    def test_zero_inputs_give_zero_input_factor(self):
        net = one_layer_net()
        data = Dataset(features=np.zeros((4, 2)), labels=[0, 1, 2, 0])

        curvature = LaplaceService.fit_kfac(net, data)

        assert np.all(curvature.factors[0].A_cov == 0.0)

    def test_single_point_matches_class_weighted_gradients(self):
        net = one_layer_net()
        x = np.array([[0.4, -0.7]])
        (index, layer), = net.adapted()

        curvature = LaplaceService.fit_kfac(net, Dataset(features=x, labels=[1]))

        logits, cache = NetworkService.forward(net, x)
        probs = NetworkService.probabilities(logits)[0]
        u = cache.core_inputs[index][0]
        expected_g = np.zeros((2, 2))
        for c in range(3):
            output_grads, _ = NetworkService.propagate(
                net, cache, NetworkService.output_gradient(logits, np.array([c]))
            )
            g = layer.scale * (output_grads[index] @ layer.B.T)[0]
            expected_g += probs[c] * np.outer(g, g)
        factor = curvature.factors[0]
        np.testing.assert_allclose(factor.A_cov, np.outer(u, u), atol=1e-10)
        np.testing.assert_allclose(factor.G_cov, expected_g, atol=1e-10)

    def test_factors_are_symmetric_psd(self):
        net = AdaptedNetworkFactory(core_scale=0.3, seed=9)
        data = gaussian_classes(9, rows=30, means=((-1.0, 0.0), (1.0, 0.0), (0.0, 1.5)))

        curvature = LaplaceService.fit_kfac(net, data, batch_size=32)

        assert len(curvature.factors) == len(net.adapted())
        for factor in curvature.factors:
            for matrix in (factor.A_cov, factor.G_cov):
                assert np.array_equal(matrix, matrix.T)
                assert np.min(np.linalg.eigvalsh(matrix)) >= -1e-10

    def test_one_layer_kron_covariance_equals_dense_inverse(self):
        net = one_layer_net()
        data = Dataset(features=np.array([[0.4, -0.7]]), labels=[2])
        prior_precision = 0.3

        posterior = LaplacePosterior(
            theta_map=NetworkService.flatten(net).values,
            structure=Structure.KRON,
            prior_precision=prior_precision,
            curvature=LaplaceService.fit_kfac(net, data),
        )
        dense = LaplaceService.ggn_dense(net, data)
        factor = posterior.curvature.factors[0]

        # vec(R) is row-major, so the input factor comes first
        np.testing.assert_allclose(dense, np.kron(factor.A_cov, factor.G_cov), atol=1e-12)
        expected = np.linalg.inv(dense + prior_precision * np.eye(posterior.dim))
        assert np.linalg.norm(LaplaceService.covariance(posterior) - expected) <= 1e-8


@pytest.mark.unit
class TestEvidence(SimpleTestCase):
    def test_flat_evidence_returns_smallest_grid_value(self):
        curvature = CurvatureDiag(h=np.zeros(1), n_data=1)
        grid = [10.0, 0.1, 1.0]

        assert LaplaceService.tune_prior_precision(curvature, np.zeros(1), 0.5, grid) == 0.1

    def test_single_point_grid(self):
        curvature = CurvatureDiagFactory()

        assert LaplaceService.tune_prior_precision(curvature, np.ones(3), 0.2, [3.5]) == 3.5

    def test_invalid_grids_rejected(self):
        curvature = CurvatureDiagFactory()
        with pytest.raises(ValueError):
            LaplaceService.tune_prior_precision(curvature, np.ones(3), 0.2, [])
        with pytest.raises(ValueError):
            LaplaceService.tune_prior_precision(curvature, np.ones(3), 0.2, [1.0, 0.0])

    def test_argmax_matches_closed_form_gaussian_evidence(self):
        # loss ½(θ−θ̂)ᵀH(θ−θ̂) with prior N(0, λ⁻¹I): exact evidence is Gaussian
        h = np.array([1000.0, 400.0])
        theta_hat = np.array([1.0, -2.0])
        grid = LaplaceService.default_grid()

        def exact(value):
            shrink = h * value / (h + value)
            return (
                -0.5 * float(np.sum(shrink * theta_hat**2))
                + math.log(value)
                - 0.5 * float(np.sum(np.log(h + value)))
            )

        expected = grid[int(np.argmax([exact(value) for value in grid]))]
        curvature = CurvatureDiag(h=h, n_data=1)

        assert LaplaceService.tune_prior_precision(curvature, theta_hat, 0.0, grid) == expected

    def test_default_grid(self):
        grid = LaplaceService.default_grid()

        assert len(grid) == 15
        assert grid[0] == pytest.approx(1e-3)
        assert grid[-1] == pytest.approx(1e3)
        np.testing.assert_allclose(np.diff(np.log(grid)), math.log(1e6) / 14)

    def test_diag_log_det_matches_dense(self):
        curvature = CurvatureDiagFactory()
        theta = np.array([0.3, -0.2, 1.1])
        value = 0.7

        _, logdet = np.linalg.slogdet(np.diag(curvature.h) + value * np.eye(3))
        prior = -0.5 * value * float(theta @ theta) + 1.5 * math.log(value)
        expected = -10 * 0.4 + prior - 0.5 * logdet

        score = LaplaceService.log_marginal_likelihood(curvature, theta, 0.4, value)
        assert abs(score - expected) <= 1e-8

    def test_kron_log_det_matches_dense(self):
        second = KronFactorFactory(
            layer_index=2,
            start=4,
            stop=13,
            A_cov=np.diag([3.0, 1.0, 0.0]),
            G_cov=np.array([[1.0, 0.2, 0.0], [0.2, 0.5, 0.1], [0.0, 0.1, 0.2]]),
        )
        curvature = kron_curvature(n_data=8, factors=[KronFactorFactory(), second])
        theta = SeededRng(4).standard_normal(13)
        value = 0.05

        dense = np.zeros((13, 13))
        for factor in curvature.factors:
            block = slice(factor.start, factor.stop)
            dense[block, block] = 8 * np.kron(factor.A_cov, factor.G_cov)
        _, logdet = np.linalg.slogdet(dense + value * np.eye(13))
        prior = -0.5 * value * float(theta @ theta) + 6.5 * math.log(value)
        expected = -8 * 0.3 + prior - 0.5 * logdet

        score = LaplaceService.log_marginal_likelihood(curvature, theta, 0.3, value)
        assert abs(score - expected) <= 1e-8

    def test_non_positive_precision_rejected(self):
        with pytest.raises(ValueError):
            LaplaceService.log_marginal_likelihood(CurvatureDiagFactory(), np.ones(3), 0.1, 0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            LaplaceService.log_marginal_likelihood(CurvatureDiagFactory(), np.ones(2), 0.1, 1.0)


@pytest.mark.unit
class TestSample(SimpleTestCase):
    def test_huge_curvature_collapses_to_map(self):
        posterior = LaplacePosteriorFactory(curvature=CurvatureDiag(h=np.full(3, 1e12), n_data=1))

        theta = LaplaceService.sample(posterior, SeededRng(0))

        assert np.linalg.norm(theta - posterior.theta_map) <= 1e-4

    def test_diag_sample_covariance(self):
        posterior = LaplacePosteriorFactory(prior_precision=0.5)
        rng = SeededRng(17)

        samples = np.array([LaplaceService.sample(posterior, rng) for _ in range(100_000)])

        expected = 1.0 / (posterior.curvature.h + 0.5)
        cov = np.cov(samples.T)
        np.testing.assert_allclose(np.diag(cov), expected, rtol=0.05)
        off_diagonal = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off_diagonal)) <= 0.05 * expected.max()
        np.testing.assert_allclose(samples.mean(axis=0), posterior.theta_map, atol=0.02)

    def test_kron_sample_covariance(self):
        curvature = kron_curvature(n_data=3)
        factor = curvature.factors[0]
        posterior = LaplacePosteriorFactory(
            theta_map=np.array([0.1, 0.2, -0.3, 0.4]),
            structure="KRON",
            prior_precision=0.8,
            curvature=curvature,
        )
        rng = SeededRng(23)

        samples = np.array([LaplaceService.sample(posterior, rng) for _ in range(100_000)])

        expected = np.linalg.inv(3 * np.kron(factor.A_cov, factor.G_cov) + 0.8 * np.eye(4))
        error = np.linalg.norm(np.cov(samples.T) - expected) / np.linalg.norm(expected)
        assert error <= 0.05
        np.testing.assert_allclose(LaplaceService.covariance(posterior), expected, atol=1e-12)

    def test_sampling_is_deterministic(self):
        posterior = LaplacePosteriorFactory()

        first = LaplaceService.sample(posterior, SeededRng(5))
        second = LaplaceService.sample(posterior, SeededRng(5))

        assert np.array_equal(first, second)

    def test_curvature_must_fit_structure(self):
        with pytest.raises(ValueError):
            LaplacePosteriorFactory(structure="KRON")
        with pytest.raises(ValueError):
            LaplacePosteriorFactory(prior_precision=0.0)
        with pytest.raises(ValueError):
            CurvatureDiag(h=np.array([-1.0, 1.0]), n_data=1)


@pytest.mark.unit
class TestLinearized(SimpleTestCase):
    def setUp(self):
        self.net = AdaptedNetworkFactory(core_scale=0.3, seed=31)
        self.data = gaussian_classes(31, rows=15, means=((-1.0, 0.0), (1.0, 0.0), (0.0, 1.5)))
        self.x = np.array([0.3, -0.4])

    def test_vanishing_covariance(self):
        posterior = LaplaceService.fit(self.net, self.data, structure="DIAG", grid=[1e300])

        _, cov = LaplaceService.linearized_logit_cov(self.net, posterior, self.x)

        np.testing.assert_allclose(cov, 0.0, atol=1e-12)

    def test_scalar_chain_rule(self):
        c = np.array([1.5, -0.5])
        pair = ProjectionPair(A=np.ones((1, 1)), B=c.reshape(1, 2), kind=ProjectionKind.SVD, rank=1)
        layer = AdaptedLinear(
            name="head",
            W0=np.zeros((1, 2)),
            bias=np.zeros(2),
            pair=pair,
            R=np.zeros((1, 1)),
            scale=1.0,
        )
        net = Network(layers=[layer], n_classes=2)
        posterior = LaplacePosteriorFactory(
            theta_map=np.zeros(1),
            prior_precision=2.0,
            curvature=CurvatureDiag(h=np.array([3.0]), n_data=1),
        )

        mean, cov = LaplaceService.linearized_logit_cov(net, posterior, np.array([1.0]))

        assert mean.tolist() == [0.0, 0.0]
        np.testing.assert_allclose(cov, np.outer(c, c) / 5.0, rtol=1e-14)

    def test_covariances_are_symmetric_psd(self):
        for structure in Structure:
            posterior = LaplaceService.fit(self.net, self.data, structure=structure)

            _, covs = LaplaceService.linearized_logit_covs(self.net, posterior, self.data.features)

            assert covs.shape == (len(self.data), 3, 3)
            assert np.array_equal(covs, np.swapaxes(covs, 1, 2))
            assert np.min(np.linalg.eigvalsh(covs)) >= -1e-8

    @pytest.mark.slow
    def test_matches_weight_sampling_in_the_linear_regime(self):
        for structure in Structure:
            fitted = LaplaceService.fit(self.net, self.data, structure=structure, grid=[1.0])
            # precision ×1e4 keeps the weight samples in the linear regime
            curvature = fitted.curvature
            if structure is Structure.DIAG:
                curvature = CurvatureDiag(h=1e4 * curvature.h, n_data=curvature.n_data)
            else:
                curvature = kron_curvature(n_data=1e4 * curvature.n_data, factors=curvature.factors)
            posterior = LaplacePosterior(
                theta_map=fitted.theta_map,
                structure=structure,
                prior_precision=1e4,
                curvature=curvature,
            )
            rng = SeededRng(37)

            logits = np.array(
                [
                    NetworkService.logits_at(
                        self.net, LaplaceService.sample(posterior, rng), self.x.reshape(1, -1)
                    )[0]
                    for _ in range(20_000)
                ]
            )

            _, cov = LaplaceService.linearized_logit_cov(self.net, posterior, self.x)
            error = np.linalg.norm(np.cov(logits.T) - cov) / np.linalg.norm(cov)
            assert error <= 0.05

    def test_linearized_logit_samples(self):
        posterior = LaplaceService.fit(self.net, self.data, structure="KRON")

        draws = LaplaceService.sample_linearized_logits(
            self.net, posterior, self.data.features[:4], 4000, SeededRng(2)
        )

        assert draws.shape == (4000, 4, 3)
        _, covs = LaplaceService.linearized_logit_covs(self.net, posterior, self.data.features[:4])
        mean = NetworkService.logits(self.net, self.data.features[:4])
        spread = np.sqrt(np.max(np.diagonal(covs, axis1=1, axis2=2)))
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.1 * spread + 1e-12)

    def test_single_input_required(self):
        posterior = LaplaceService.fit(self.net, self.data, structure="DIAG")

        with pytest.raises(ShapeError):
            LaplaceService.linearized_logit_cov(self.net, posterior, self.data.features[:2])


@pytest.mark.integration
class TestFitAndStore(SimpleTestCase):
    def setUp(self):
        self.net = AdaptedNetworkFactory(core_scale=0.3, seed=13)
        self.data = gaussian_classes(13, rows=20, means=((-1.0, 0.0), (1.0, 0.0), (0.0, 1.5)))

    def test_fit_records_evidence_curve(self):
        grid = [10.0, 0.01, 1.0]
        posterior = LaplaceService.fit(self.net, self.data, structure="KRON", grid=grid)

        assert posterior.grid == [0.01, 1.0, 10.0]
        assert len(posterior.log_evidence) == 3
        best = posterior.grid[int(np.argmax(posterior.log_evidence))]
        assert posterior.prior_precision == best
        assert np.array_equal(posterior.theta_map, NetworkService.flatten(self.net).values)
        assert posterior.n_data == 60

    def test_round_trip(self):
        for structure in Structure:
            posterior = LaplaceService.fit(self.net, self.data, structure=structure)
            with tempfile.TemporaryDirectory() as directory:
                LaplaceStore.save(posterior, directory, checkpoint_epoch=4)
                loaded = LaplaceStore.load(directory)
                epoch = LaplaceStore.checkpoint_epoch(directory)

            assert epoch == 4
            assert loaded.structure is structure
            assert loaded.prior_precision == posterior.prior_precision
            assert np.array_equal(loaded.theta_map, posterior.theta_map)
            rng_a, rng_b = SeededRng(8), SeededRng(8)
            assert np.array_equal(
                LaplaceService.sample(loaded, rng_a), LaplaceService.sample(posterior, rng_b)
            )
