import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lance.regression import (
    SingularGramError,
    band_profiles,
    banded_gram,
    coefficients_at,
    cov_factor_at,
    residual_profile,
    ridge_shift,
)


def lstsq_fit(X, j, k):
    """SVD-based least squares of column j on columns j-k..j-1."""
    y = X[:, j]
    if k == 0:
        return np.zeros(0), y @ y / X.shape[0]
    Z = X[:, j - k : j]
    a, *_ = np.linalg.lstsq(Z, y, rcond=None)
    r = y - Z @ a
    return a, r @ r / X.shape[0]


class TestExactProfile:
    def test_matches_svd_oracle(self, rng):
        X = rng.standard_normal((40, 12))
        X[:, 5] += 0.8 * X[:, 4] - 0.3 * X[:, 2]
        prof = residual_profile(X, 9, 8)
        assert prof.K == 8
        for k in range(9):
            a, d = lstsq_fit(X, 9, k)
            assert prof.dhat[k] == pytest.approx(d, rel=1e-10)
            np.testing.assert_allclose(coefficients_at(prof, k), a, rtol=1e-9, atol=1e-12)

    def test_zero_bandwidth_is_second_moment(self, rng):
        X = rng.standard_normal((30, 4))
        prof = residual_profile(X, 2, 0)
        assert prof.dhat[0] == pytest.approx(X[:, 2] @ X[:, 2] / 30, rel=1e-14)

    def test_column_order_of_coefficients(self, rng):
        n = 500
        X = rng.standard_normal((n, 4))
        X[:, 3] = 2.0 * X[:, 1] + 0.01 * rng.standard_normal(n)
        a = coefficients_at(residual_profile(X, 3, 2), 2)
        # a[0] multiplies column 1, a[1] column 2
        assert a[0] == pytest.approx(2.0, abs=1e-2)
        assert abs(a[1]) < 1e-2

    def test_cov_factor_two_by_two(self):
        G = np.array([[2.0, 1.0], [1.0, 2.0]])
        L = np.linalg.cholesky(G)
        X = np.zeros((4, 3))
        X[:2, :2] = L.T
        X[:, 2] = [1.0, -1.0, 0.5, 0.25]
        F = cov_factor_at(residual_profile(X, 2, 2), 2)
        np.testing.assert_allclose(F @ F.T, [[2 / 3, -1 / 3], [-1 / 3, 2 / 3]], atol=1e-14)
        assert F[0, 1] == 0

    def test_cov_factor_scaled(self, rng):
        X = rng.standard_normal((25, 6))
        prof = residual_profile(X, 5, 4)
        for k in range(1, 5):
            Z = X[:, 5 - k : 5]
            F = cov_factor_at(prof, k, scale=3.0)
            np.testing.assert_allclose(F @ F.T, 3.0 * np.linalg.inv(Z.T @ Z), rtol=1e-9)
            assert np.allclose(np.triu(F, 1), 0)

    def test_k_at_least_n_rejected(self, rng):
        X = rng.standard_normal((5, 10))
        with pytest.raises(ValueError, match="n="):
            residual_profile(X, 8, 5)

    def test_bad_k(self, rng):
        prof = residual_profile(rng.standard_normal((10, 4)), 3, 2)
        with pytest.raises(ValueError):
            coefficients_at(prof, 3)
        with pytest.raises(ValueError):
            coefficients_at(prof, -1)

    def test_collinear_predecessors_truncate(self, rng):
        X = rng.standard_normal((20, 5))
        X[:, 2] = X[:, 3]
        prof = residual_profile(X, 4, 3)
        assert prof.truncated and prof.K == 1
        with pytest.raises(SingularGramError):
            coefficients_at(prof, 2)

    def test_exact_fit_is_degenerate(self, rng):
        X = rng.standard_normal((20, 4))
        X[:, 3] = 1.5 * X[:, 2]
        prof = residual_profile(X, 3, 3)
        assert not prof.degenerate[0]
        assert prof.degenerate[1:].all()
        assert np.all(prof.dhat[1:] == 0)

    def test_batch_matches_single(self, rng):
        X = rng.standard_normal((30, 15))
        caps = np.minimum(np.arange(15), 6)
        batch = band_profiles(X, caps)
        for prof in batch:
            single = residual_profile(X, prof.j, caps[prof.j])
            np.testing.assert_allclose(prof.dhat, single.dhat, rtol=1e-12)

    def test_threads_identical(self, rng):
        X = rng.standard_normal((30, 40))
        caps = np.minimum(np.arange(40), 10)
        one = band_profiles(X, caps, threads=1)
        four = band_profiles(X, caps, threads=4)
        for a, b in zip(one, four):
            np.testing.assert_array_equal(a.dhat, b.dhat)

    def test_banded_gram(self, rng):
        X = rng.standard_normal((9, 7))
        G = banded_gram(X, 3)
        full = X.T @ X
        for j in range(7):
            for lag in range(min(j, 3) + 1):
                assert G[j, lag] == pytest.approx(full[j, j - lag], rel=1e-13)


@st.composite
def data(draw):
    n = draw(st.integers(8, 40))
    p = draw(st.integers(2, 10))
    seed = draw(st.integers(0, 2**32 - 1))
    return np.random.default_rng(seed).standard_normal((n, p))


class TestProperties:
    @given(data())
    @settings(max_examples=60, deadline=None)
    def test_dhat_monotone(self, X):
        n, p = X.shape
        j = p - 1
        prof = residual_profile(X, j, min(j, n - 1))
        assert np.all(np.diff(prof.dhat) <= 1e-12 * prof.dhat[0])

    @given(data(), st.floats(0.01, 100.0))
    @settings(max_examples=40, deadline=None)
    def test_scale_equivariance(self, X, c):
        n, p = X.shape
        j = p - 1
        K = min(j, n - 2)
        a = residual_profile(X, j, K)
        b = residual_profile(c * X, j, K)
        np.testing.assert_allclose(b.dhat, c * c * a.dhat, rtol=1e-8)


class TestRidge:
    def test_shift(self):
        assert ridge_shift(1.0, 0.99, 0.1) == pytest.approx(0.1 / 1.09)

    def test_more_predecessors_than_samples(self, rng):
        n = 10
        X = rng.standard_normal((n, n + 8))
        prof = residual_profile(X, n + 6, n + 5, ridge_c=1.0)
        assert prof.K == n + 5
        assert np.all(np.isfinite(prof.dhat)) and np.all(prof.dhat > 0)

    def test_vanishing_ridge_matches_exact(self, rng):
        X = rng.standard_normal((30, 8))
        exact = residual_profile(X, 7, 5)
        ridge = residual_profile(X, 7, 5, ridge_c=1e-8)
        np.testing.assert_allclose(ridge.dhat, exact.dhat, rtol=1e-4)
        np.testing.assert_allclose(ridge.log_det_ratio, 0, atol=1e-4)

    def test_direct_formulas(self, rng):
        n, alpha, gamma, c = 12, 0.9, 0.3, 2.0
        X = rng.standard_normal((n, 6))
        prof = residual_profile(X, 5, 4, ridge_c=c, alpha=alpha, gamma=gamma)
        s = c * gamma / (alpha + gamma)
        y = X[:, 5]
        for k in range(1, 5):
            Z = X[:, 5 - k : 5]
            G, b = Z.T @ Z, Z.T @ y
            mean = np.linalg.solve(G + s * np.eye(k), b)
            np.testing.assert_allclose(coefficients_at(prof, k), mean, rtol=1e-10)
            # minimum over a of alpha|y - Za|^2 + gamma (a - m_c)'(G + cI)(a - m_c)
            m_c = np.linalg.solve(G + c * np.eye(k), b)
            H = alpha * G + gamma * (G + c * np.eye(k))
            g = alpha * b + gamma * (G + c * np.eye(k)) @ m_c
            a_star = np.linalg.solve(H, g)
            r = y - Z @ a_star
            q = alpha * r @ r + gamma * (a_star - m_c) @ (G + c * np.eye(k)) @ (a_star - m_c)
            assert prof.dhat[k] == pytest.approx(q / (alpha * n), rel=1e-10)
            ratio = np.linalg.slogdet(G + s * np.eye(k))[1] - np.linalg.slogdet(G + c * np.eye(k))[1]
            assert prof.log_det_ratio[k] == pytest.approx(ratio, rel=1e-10, abs=1e-12)


N_DIST, K0, K_BIG = 50, 1, 3


@pytest.fixture(scope="module")
def null_profiles():
    """Residual variances of 2000 replicates of a true bandwidth-1 model, n=50."""
    rng = np.random.default_rng(77)
    d0 = 1.7
    out = []
    for _ in range(2000):
        X = rng.standard_normal((N_DIST, 4))
        X[:, 3] = 0.6 * X[:, 2] + np.sqrt(d0) * rng.standard_normal(N_DIST)
        out.append(residual_profile(X, 3, 3).dhat)
    return np.array(out), d0


def test_residual_ratio_is_beta(null_profiles):
    dhat, _ = null_profiles
    law = stats.beta((N_DIST - K_BIG) / 2, (K_BIG - K0) / 2)
    assert stats.kstest(dhat[:, K_BIG] / dhat[:, K0], law.cdf).pvalue > 1e-3


def test_scaled_residual_is_chi_square(null_profiles):
    dhat, d0 = null_profiles
    law = stats.chi2(N_DIST - K0)
    assert stats.kstest(N_DIST * dhat[:, K0] / d0, law.cdf).pvalue > 1e-3
