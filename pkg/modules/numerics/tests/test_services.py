"""
Unit tests for numerics services.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from modules.numerics.exceptions import NumericalError, RankDeficiencyError, ShapeError
from modules.numerics.factories import random_matrix, random_spd
from modules.numerics.models import SeededRng, WelfordState
from modules.numerics.services import LinearAlgebraService, RandomService, WelfordService


def orthonormality_gap(matrix):
    return np.max(np.abs(matrix.T @ matrix - np.eye(matrix.shape[1])))


@pytest.mark.unit
class TestSvd(SimpleTestCase):
    def test_diagonal_matrix(self):
        result = LinearAlgebraService.svd(np.diag([3.0, 2.0, 1.0]))

        assert np.allclose(result.S, [3.0, 2.0, 1.0])
        assert np.allclose(result.U, np.eye(3))
        assert np.allclose(result.V, np.eye(3))

    def test_scalar_sign_convention(self):
        result = LinearAlgebraService.svd([[-5.0]])

        assert result.S.tolist() == [5.0]
        assert result.U.tolist() == [[1.0]]
        assert result.V.tolist() == [[-1.0]]

    def test_reconstruction(self):
        matrix = random_matrix(42, 6, 5)

        result = LinearAlgebraService.svd(matrix)

        assert np.linalg.norm(result.reconstruct() - matrix) <= 1e-8
        assert orthonormality_gap(result.U) <= 1e-10
        assert orthonormality_gap(result.V) <= 1e-10
        assert np.all(np.diff(result.S) <= 0)

    def test_largest_entry_of_each_u_column_positive(self):
        result = LinearAlgebraService.svd(random_matrix(3, 7, 4))

        for column in result.U.T:
            assert column[np.argmax(np.abs(column))] > 0

    def test_eckart_young_truncation_error(self):
        for seed in range(100):
            rows = 2 + seed % 63
            cols = 2 + (7 * seed) % 63
            matrix = random_matrix(seed, rows, cols)
            result = LinearAlgebraService.svd(matrix)
            for rank in (1, 2, 4, 8):
                if rank > result.k:
                    continue
                error = np.linalg.norm(matrix - result.reconstruct(rank)) ** 2
                tail = float(np.sum(result.S[rank:] ** 2))
                assert abs(error - tail) <= 1e-8 * max(1.0, tail)


@pytest.mark.unit
class TestQrThin(SimpleTestCase):
    def test_identity(self):
        result = LinearAlgebraService.qr_thin(np.eye(3))

        assert np.allclose(np.abs(result.Q), np.eye(3))
        assert np.allclose(result.Q @ result.R, np.eye(3))

    def test_permutation_columns_are_orthonormal(self):
        result = LinearAlgebraService.qr_thin([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])

        assert orthonormality_gap(result.Q) <= 1e-12

    def test_reconstruction(self):
        matrix = random_matrix(7, 8, 3)

        result = LinearAlgebraService.qr_thin(matrix)

        assert np.linalg.norm(result.Q @ result.R - matrix) <= 1e-10
        assert np.allclose(result.R, np.triu(result.R))

    def test_wide_matrix_rejected(self):
        with pytest.raises(ShapeError):
            LinearAlgebraService.qr_thin(np.ones((2, 3)))

    def test_rank_deficient_rejected(self):
        with pytest.raises(RankDeficiencyError):
            LinearAlgebraService.qr_thin([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])


@pytest.mark.unit
class TestEigSym(SimpleTestCase):
    def test_diagonal(self):
        result = LinearAlgebraService.eig_sym(np.diag([4.0, 1.0]))

        assert np.allclose(result.values, [4.0, 1.0])
        assert np.allclose(result.vectors, np.eye(2))

    def test_classic_two_by_two(self):
        result = LinearAlgebraService.eig_sym([[2.0, 1.0], [1.0, 2.0]])

        assert np.allclose(result.values, [3.0, 1.0])
        assert np.allclose(np.abs(result.vectors[:, 0]), np.ones(2) / np.sqrt(2))
        assert np.allclose(
            result.vectors[:, 1] * np.sign(result.vectors[0, 1]),
            np.array([1.0, -1.0]) / np.sqrt(2),
        )

    def test_trace_identity_and_eigen_equation(self):
        matrix = random_spd(10, 10)

        result = LinearAlgebraService.eig_sym(matrix)

        assert abs(np.sum(result.values) - np.trace(matrix)) <= 1e-10
        assert orthonormality_gap(result.vectors) <= 1e-10
        assert np.max(np.abs(matrix @ result.vectors - result.vectors * result.values)) <= 1e-8

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            LinearAlgebraService.eig_sym([[1.0, 2.0], [0.0, 1.0]])

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError):
            LinearAlgebraService.eig_sym(np.ones((2, 3)))


@pytest.mark.unit
class TestPsdSqrt(SimpleTestCase):
    def test_identity(self):
        root, inverse_root = LinearAlgebraService.psd_sqrt_and_invsqrt(np.eye(2))

        assert np.allclose(root, np.eye(2))
        assert np.allclose(inverse_root, np.eye(2))

    def test_diagonal(self):
        root, inverse_root = LinearAlgebraService.psd_sqrt_and_invsqrt(np.diag([100.0, 1.0]))

        assert np.allclose(root, np.diag([10.0, 1.0]))
        assert np.allclose(inverse_root, np.diag([0.1, 1.0]))

    def test_square_oracle_with_ridge(self):
        matrix = random_spd(4, 6)

        root, inverse_root = LinearAlgebraService.psd_sqrt_and_invsqrt(matrix, ridge=1e-6)

        assert np.linalg.norm(root @ root - (matrix + 1e-6 * np.eye(6))) <= 1e-8
        assert np.linalg.norm(root @ inverse_root - np.eye(6)) <= 1e-8

    def test_singular_without_ridge_fails(self):
        with pytest.raises(NumericalError):
            LinearAlgebraService.psd_sqrt_and_invsqrt(np.diag([1.0, 0.0]))

    def test_negative_ridge_rejected(self):
        with pytest.raises(ValueError):
            LinearAlgebraService.psd_sqrt_and_invsqrt(np.eye(2), ridge=-1.0)


@pytest.mark.unit
class TestWelford(SimpleTestCase):
    def test_single_batch(self):
        state = WelfordService.update(WelfordState(dim=2), np.eye(2))

        assert state.count == 2
        assert np.array_equal(WelfordService.finalize(state), 0.5 * np.eye(2))

    def test_split_batches_match(self):
        joined = WelfordService.update(WelfordState(dim=2), np.eye(2))
        split = WelfordService.from_batches([np.eye(2)[:1], np.eye(2)[1:]], dim=2)

        assert np.array_equal(WelfordService.finalize(joined), WelfordService.finalize(split))

    def test_two_pass_oracle(self):
        rows = random_matrix(8, 1000, 5)
        oracle = rows.T @ rows / 1000
        batches = [rows[i : i + 37] for i in range(0, 1000, 37)]

        state = WelfordService.from_batches(batches, dim=5)
        moment = WelfordService.finalize(state)

        assert np.linalg.norm(moment - oracle) <= 1e-10 * np.linalg.norm(oracle)
        assert np.array_equal(moment, moment.T)

    def test_batch_splitting_is_stable(self):
        rows = random_matrix(9, 240, 4)
        coarse = WelfordService.from_batches([rows[:120], rows[120:]], dim=4)
        fine = WelfordService.from_batches([rows[i : i + 8] for i in range(0, 240, 8)], dim=4)

        first, second = WelfordService.finalize(coarse), WelfordService.finalize(fine)

        assert np.linalg.norm(first - second) <= 1e-10 * np.linalg.norm(first)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            WelfordService.update(WelfordState(dim=3), np.ones((2, 2)))

    def test_finalize_empty(self):
        with pytest.raises(ValueError):
            WelfordService.finalize(WelfordState(dim=2))


@pytest.mark.unit
class TestStandardNormal(SimpleTestCase):
    def test_determinism(self):
        first = RandomService.standard_normal(SeededRng(1), 2, 2)
        second = RandomService.standard_normal(SeededRng(1), 2, 2)

        assert np.array_equal(first, second)

    def test_seeds_differ(self):
        first = RandomService.standard_normal(SeededRng(1), 2, 2)
        second = RandomService.standard_normal(SeededRng(2), 2, 2)

        assert not np.array_equal(first, second)

    def test_moments(self):
        draws = RandomService.standard_normal(SeededRng(3), 400, 250)

        assert draws.shape == (400, 250)
        assert -0.02 < draws.mean() < 0.02
        assert 0.95 < draws.var() < 1.05
