"""PCA and kernel PCA against independent oracles.

The linear-kernel route is the main cross-check: its scores must match
plain PCA scores exactly (up to component sign), which exercises the
Gram centering, the eigenvector scaling, and the projection path in
one shot.
"""

import numpy as np
import pytest

from daepca import linalg
from daepca.errors import DegenerateColumn, InsufficientRank, InvalidConfig
from daepca.subspace import (
    KernelConfig,
    fit_kpca,
    fit_pca,
    kernel_matrix,
    kpca_project,
    kpca_scores,
    kpca_statistics,
)


def _correlated(rng, n, m, rank=None):
    r = m if rank is None else rank
    z = rng.standard_normal((n, r))
    w = rng.standard_normal((r, m))
    return z @ w


class TestPcaOracle:
    def test_leading_direction_by_angle_scan(self, rng):
        x = _correlated(rng, 400, 2)
        model = fit_pca(x, a=1)
        xs = linalg.apply_stats(x, model.input_stats)

        thetas = np.linspace(0.0, np.pi, 20001)
        dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        variances = np.var(xs @ dirs.T, axis=0, ddof=1)
        best = dirs[np.argmax(variances)]

        lead = model.loadings[:, 0]
        assert abs(float(best @ lead)) > 1.0 - 1e-7
        np.testing.assert_allclose(
            variances.max(), model.eigenvalues[0], rtol=1e-6)

    def test_reconstruction_error_equals_discarded_eigenvalues(self, rng):
        x = _correlated(rng, 120, 6)
        full = fit_pca(x, a=6)
        xs = linalg.apply_stats(x, full.input_stats)
        for a in (1, 3, 5):
            model = fit_pca(x, a=a)
            p = model.loadings
            err = np.sum((xs - xs @ p @ p.T) ** 2)
            expected = (len(x) - 1) * np.sum(full.eigenvalues[a:])
            np.testing.assert_allclose(err, expected, rtol=1e-9)

    def test_reconstruction_error_monotone_in_a(self, rng):
        x = _correlated(rng, 90, 5)
        stats = fit_pca(x, a=1).input_stats
        xs = linalg.apply_stats(x, stats)
        errs = []
        for a in range(1, 6):
            p = fit_pca(x, a=a).loadings
            errs.append(np.sum((xs - xs @ p @ p.T) ** 2))
        assert all(errs[i + 1] <= errs[i] + 1e-12 for i in range(len(errs) - 1))

    def test_scores_are_uncorrelated_with_eigenvalue_variance(self, rng):
        x = _correlated(rng, 300, 4)
        model = fit_pca(x, a=4)
        scores = model.transform(x)
        cov = scores.T @ scores / (len(x) - 1)
        np.testing.assert_allclose(cov, np.diag(model.eigenvalues), atol=1e-10)

    def test_rejects_bad_component_count(self, rng):
        x = _correlated(rng, 50, 3)
        with pytest.raises(InvalidConfig):
            fit_pca(x, a=0)
        with pytest.raises(InvalidConfig):
            fit_pca(x, a=4)

    def test_rejects_constant_column(self, rng):
        x = _correlated(rng, 50, 3)
        x[:, 1] = 7.0
        with pytest.raises(DegenerateColumn):
            fit_pca(x, a=2)


class TestLinearKernelAgreement:
    def test_scores_match_pca_including_magnitude(self, rng):
        x = _correlated(rng, 60, 5)
        a = 4
        pca = fit_pca(x, a=a)
        kpca = fit_kpca(x, a=a, cfg=KernelConfig(kind="linear"))
        probe = _correlated(rng, 25, 5)

        s_pca = pca.transform(probe)
        s_kpca = kpca_scores(kpca, probe)
        assert s_pca.shape == s_kpca.shape
        for j in range(a):
            col = s_kpca[:, j]
            direct = np.linalg.norm(s_pca[:, j] - col)
            flipped = np.linalg.norm(s_pca[:, j] + col)
            assert min(direct, flipped) < 1e-8

    def test_eigenvalue_scaling_matches(self, rng):
        x = _correlated(rng, 60, 5)
        pca = fit_pca(x, a=5)
        kpca = fit_kpca(x, a=5, cfg=KernelConfig(kind="linear"))
        lam_hat = kpca.eigenvalues / (kpca.n_train - 1)
        np.testing.assert_allclose(lam_hat, pca.eigenvalues, rtol=1e-9)

    def test_t2_matches_pca_t2(self, rng):
        x = _correlated(rng, 80, 4)
        pca = fit_pca(x, a=3)
        kpca = fit_kpca(x, a=3, cfg=KernelConfig(kind="linear"))
        probe = _correlated(rng, 10, 4)
        t2_p, _ = pca.statistics(probe)
        t2_k, _ = kpca.statistics(probe)
        np.testing.assert_allclose(t2_k, t2_p, rtol=1e-8)


class TestGramProperties:
    def test_double_centered_rows_sum_to_zero(self, rng):
        x = _correlated(rng, 70, 4)
        cfg = KernelConfig(kind="rbf", width=25.0)
        model = fit_kpca(x, a=3, cfg=cfg)
        k = kernel_matrix(cfg, model.training_data, model.training_data)
        kbar = (k - model.gram_row_means[None, :]
                - model.gram_row_means[:, None] + model.gram_grand_mean)
        assert np.abs(kbar.sum(axis=1)).max() < 1e-8

    def test_rbf_gram_is_positive_semidefinite(self, rng):
        x = _correlated(rng, 50, 6)
        k = kernel_matrix(KernelConfig(kind="rbf", width=10.0), x, x)
        np.testing.assert_allclose(k, k.T, atol=1e-12)
        eigvals = np.linalg.eigvalsh(k)
        assert eigvals.min() > -1e-8

    def test_rbf_diagonal_is_one(self, rng):
        x = _correlated(rng, 20, 3)
        k = kernel_matrix(KernelConfig(kind="rbf", width=4.0), x, x)
        np.testing.assert_allclose(np.diag(k), 1.0, atol=1e-14)


class TestKpcaSpe:
    def test_rank_deficient_spe_matches_svd_projector(self, rng):
        # data with intrinsic rank 3 in a 6-dim space; SPE of a generic
        # probe must equal its squared distance to the training span
        x = _correlated(rng, 60, 6, rank=3)
        model = fit_kpca(x, a=2, cfg=KernelConfig(kind="linear"))
        xs_train = model.training_data
        u, s, _ = np.linalg.svd(xs_train.T, full_matrices=False)
        u = u[:, s > 1e-8 * s[0]]
        assert u.shape[1] == 3

        probe = rng.standard_normal((8, 6)) * 3.0
        _, spe_vals = model.statistics(probe)
        xs = linalg.apply_stats(probe, model.input_stats)
        resid = xs - xs @ u @ u.T
        np.testing.assert_allclose(
            spe_vals, np.sum(resid * resid, axis=1), rtol=1e-8, atol=1e-10)

    def test_full_rank_linear_spe_is_zero(self, rng):
        x = _correlated(rng, 60, 5)
        model = fit_kpca(x, a=2, cfg=KernelConfig(kind="linear"))
        probe = rng.standard_normal((10, 5)) * 4.0
        _, spe_vals = model.statistics(probe)
        # span is all of R^5, so the residual vanishes to rounding
        assert np.abs(spe_vals).max() < 1e-8

    def test_training_points_have_tiny_spe_under_full_retention(self, rng):
        x = _correlated(rng, 40, 4)
        cfg = KernelConfig(kind="rbf", width=30.0)
        model = fit_kpca(x, a=3, cfg=cfg)
        _, spe_vals = model.statistics(x)
        assert np.all(spe_vals > -1e-10)


class TestKpcaPaths:
    def test_batch_statistics_match_per_sample(self, rng):
        x = _correlated(rng, 50, 4)
        model = fit_kpca(x, a=3, cfg=KernelConfig(kind="rbf", width=12.0))
        probe = _correlated(rng, 7, 4)
        t2_b, spe_b = model.statistics(probe)
        for i, row in enumerate(probe):
            t2_1, spe_1 = kpca_statistics(model, row)
            np.testing.assert_allclose(t2_b[i], t2_1, rtol=1e-10)
            np.testing.assert_allclose(spe_b[i], spe_1, rtol=1e-10, atol=1e-12)

    def test_scores_match_single_sample_projection(self, rng):
        x = _correlated(rng, 45, 4)
        model = fit_kpca(x, a=2, cfg=KernelConfig(kind="rbf", width=9.0))
        probe = _correlated(rng, 6, 4)
        batch = kpca_scores(model, probe)
        for i, row in enumerate(probe):
            np.testing.assert_allclose(
                batch[i], kpca_project(model, row), rtol=1e-10, atol=1e-13)

    def test_train_scores_are_stored_projection(self, rng):
        x = _correlated(rng, 40, 3)
        model = fit_kpca(x, a=2, cfg=KernelConfig(kind="rbf", width=6.0))
        np.testing.assert_allclose(
            model.train_scores, kpca_scores(model, x), rtol=1e-9, atol=1e-12)


class TestKpcaValidation:
    def test_rejects_bad_component_count(self, rng):
        x = _correlated(rng, 30, 3)
        with pytest.raises(InvalidConfig):
            fit_kpca(x, a=0, cfg=KernelConfig(kind="linear"))
        with pytest.raises(InvalidConfig):
            fit_kpca(x, a=31, cfg=KernelConfig(kind="linear"))

    def test_identical_rows_lack_rank(self):
        x = np.tile([1.0, 2.0, 3.0], (20, 1))
        with pytest.raises(InsufficientRank):
            fit_kpca(x, a=1, cfg=KernelConfig(kind="rbf", width=5.0))

    def test_too_many_components_for_rank(self, rng):
        x = _correlated(rng, 30, 6, rank=2)
        with pytest.raises(InsufficientRank):
            fit_kpca(x, a=5, cfg=KernelConfig(kind="linear"))

    def test_constant_column_is_tolerated(self, rng):
        x = _correlated(rng, 30, 3)
        x[:, 0] = 5.0
        model = fit_kpca(x, a=2, cfg=KernelConfig(kind="rbf", width=8.0))
        assert model.input_stats.std[0] == 1.0

    def test_kernel_config_validation(self):
        with pytest.raises(InvalidConfig):
            KernelConfig(kind="poly")
        with pytest.raises(InvalidConfig):
            KernelConfig(kind="rbf", width=-1.0)
        with pytest.raises(InvalidConfig):
            KernelConfig(kind="rbf", width=float("inf"))
