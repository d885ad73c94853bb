"""Tests for scalers, the Jacobi eigensolver, PCA and kernel-PCA.

The eigen/PCA checks are verified against numpy.linalg.eigh, which shares no
code with the package's cyclic-Jacobi path.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelmarket.errors import InvalidInputError
from modelmarket.linalg import (
    fit_apply_scaler,
    jacobi_eigh,
    kernel_pca,
    pairwise_sq_dists,
    pca,
    sym_eigen,
)


class TestScalers:
    def test_minmax_affine_endpoints(self):
        X = np.array([[0.0], [5.0], [10.0]])
        scaled, _ = fit_apply_scaler(X, "minmax")
        np.testing.assert_allclose(scaled[:, 0], [0.0, 0.5, 1.0])

    def test_constant_column_maps_to_zero(self):
        X = np.array([[3.0], [3.0], [3.0]])
        for kind in ("minmax", "gaussian"):
            scaled, _ = fit_apply_scaler(X, kind)
            np.testing.assert_array_equal(scaled, np.zeros((3, 1)))

    def test_gaussian_zero_mean_unit_variance(self):
        X = np.array([[1.0], [2.0], [3.0]])
        scaled, _ = fit_apply_scaler(X, "gaussian")
        assert abs(scaled[:, 0].mean()) < 1e-12
        assert abs(scaled[:, 0].var() - 1.0) < 1e-12

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            fit_apply_scaler(np.array([[1.0], [np.nan]]), "minmax")
        with pytest.raises(InvalidInputError):
            fit_apply_scaler(np.array([[1.0], [np.inf]]), "gaussian")

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidInputError):
            fit_apply_scaler(np.eye(2), "robust")

    def test_refit_params_reusable(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 4))
        scaled, params = fit_apply_scaler(X, "minmax")
        np.testing.assert_array_equal(params.apply(X), scaled)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_minmax_idempotence_on_fit_data(self, column):
        X = np.array(column).reshape(-1, 1)
        scaled, _ = fit_apply_scaler(X, "minmax")
        assert np.all(scaled >= 0.0) and np.all(scaled <= 1.0)


class TestSymEigen:
    def test_identity_eigenvalues(self):
        vals, vecs = sym_eigen(np.eye(4), 4)
        np.testing.assert_allclose(vals, np.ones(4))
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(4), atol=1e-12)

    def test_analytic_2x2(self):
        vals, _ = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]), 2)
        np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-12)

    def test_residual_and_orthonormality_random(self):
        rng = np.random.default_rng(42)
        for n in (2, 3, 5, 10, 25, 50):
            B = rng.normal(size=(n, n))
            A = (B + B.T) / 2.0
            vals, V = sym_eigen(A, n)
            a_inf = np.max(np.abs(A).sum(axis=1))
            for j in range(n):
                resid = np.max(np.abs(A @ V[:, j] - vals[j] * V[:, j]))
                assert resid <= 1e-8 * a_inf
            np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-8)
            assert np.all(np.diff(vals) <= 1e-12)

    def test_matches_numpy_eigh(self):
        rng = np.random.default_rng(7)
        B = rng.normal(size=(8, 8))
        A = (B + B.T) / 2.0
        vals, _ = sym_eigen(A, 8)
        expected = np.sort(np.linalg.eigvalsh(A))[::-1]
        np.testing.assert_allclose(vals, expected, atol=1e-10)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        B = rng.normal(size=(6, 6))
        A = (B + B.T) / 2.0
        _, V = sym_eigen(A, 6)
        for j in range(6):
            assert V[np.argmax(np.abs(V[:, j])), j] >= 0.0

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)

    def test_k_out_of_range(self):
        with pytest.raises(InvalidInputError):
            sym_eigen(np.eye(3), 4)
        with pytest.raises(InvalidInputError):
            sym_eigen(np.eye(3), 0)

    def test_zero_matrix(self):
        vals, V = jacobi_eigh(np.zeros((3, 3)))
        np.testing.assert_array_equal(vals, np.zeros(3))
        np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-12)


class TestPCA:
    def test_collinear_data_one_direction(self):
        t = np.linspace(-2.0, 2.0, 30)
        X = np.column_stack([t, 3.0 * t])
        scores = pca(X, 1)
        total_var = np.var(X - X.mean(axis=0), axis=0).sum()
        captured = np.var(scores[:, 0])
        assert total_var - captured < 1e-10 * total_var

    def test_full_dim_preserves_variance(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(40, 5))
        scores = pca(X, 5)
        total = np.var(X - X.mean(axis=0), axis=0).sum()
        projected = np.var(scores, axis=0).sum()
        assert abs(total - projected) <= 1e-8 * total

    def test_matches_covariance_eigh_oracle(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 6))
        centered = X - X.mean(axis=0)
        cov = centered.T @ centered / (X.shape[0] - 1)
        w, V = np.linalg.eigh(cov)
        V = V[:, np.argsort(w)[::-1]][:, :3]
        expected = centered @ V
        got = pca(X, 3)
        for j in range(3):
            diff = min(
                np.max(np.abs(got[:, j] - expected[:, j])),
                np.max(np.abs(got[:, j] + expected[:, j])),
            )
            assert diff < 1e-6

    def test_gram_path_matches_covariance_path(self):
        # More columns than rows forces the Gram-side branch.
        rng = np.random.default_rng(9)
        X = rng.normal(size=(8, 20))
        centered = X - X.mean(axis=0)
        cov = centered.T @ centered / (X.shape[0] - 1)
        w, V = np.linalg.eigh(cov)
        V = V[:, np.argsort(w)[::-1]][:, :4]
        expected = centered @ V
        got = pca(X, 4)
        for j in range(4):
            diff = min(
                np.max(np.abs(got[:, j] - expected[:, j])),
                np.max(np.abs(got[:, j] + expected[:, j])),
            )
            assert diff < 1e-6

    def test_row_permutation_equivariance(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(12, 4))
        perm = rng.permutation(12)
        direct = pca(X, 2)
        permuted = pca(X[perm], 2)
        restored = np.empty_like(permuted)
        restored[perm] = permuted
        for j in range(2):
            diff = min(
                np.max(np.abs(direct[:, j] - restored[:, j])),
                np.max(np.abs(direct[:, j] + restored[:, j])),
            )
            assert diff < 1e-8

    def test_d_out_of_range(self):
        with pytest.raises(InvalidInputError):
            pca(np.eye(3), 4)
        with pytest.raises(InvalidInputError):
            pca(np.eye(3), 0)


class TestKernelPCA:
    def test_duplicate_rows_duplicate_embeddings(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(9, 4))
        X[4] = X[1]
        emb = kernel_pca(X, 3, gamma=0.5)
        np.testing.assert_allclose(emb[4], emb[1], atol=1e-8)

    def test_linear_kernel_matches_pca(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(15, 5))
        expected = pca(X, 3)
        got = kernel_pca(X, 3, gamma=1.0, kernel="linear")
        for j in range(3):
            diff = min(
                np.max(np.abs(got[:, j] - expected[:, j])),
                np.max(np.abs(got[:, j] + expected[:, j])),
            )
            assert diff < 1e-6

    def test_zero_padding_at_low_rank(self):
        # Three distinct points in 5-D: centered kernel rank <= 2.
        X = np.array(
            [
                [0.0, 0.0, 0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0, 0.0],
            ]
        )
        emb = kernel_pca(X, 3, gamma=1.0)
        assert emb.shape == (3, 3)
        np.testing.assert_array_equal(emb[:, 2], np.zeros(3))

    def test_gamma_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            kernel_pca(np.eye(3), 2, gamma=0.0)

    def test_pairwise_sq_dists(self):
        X = np.array([[0.0, 0.0], [3.0, 4.0]])
        D = pairwise_sq_dists(X)
        np.testing.assert_allclose(D, [[0.0, 25.0], [25.0, 0.0]])
