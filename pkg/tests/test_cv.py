import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp

from lance.cv import (
    DEFAULT_GRID,
    build_cache,
    cv_caps,
    default_grid,
    log_marginal_test,
    lpd_cv,
    lpd_naive,
    make_splits,
)
from lance.model import Hyperparameters
from lance.regression import residual_profile


class TestSplits:
    def test_sizes(self):
        plan = make_splits(5, 3, seed=1)
        for tr, te in plan.splits:
            assert len(tr) == 3 and len(te) == 2

    def test_deterministic(self):
        a, b = make_splits(50, 5, seed=4), make_splits(50, 5, seed=4)
        for (x1, y1), (x2, y2) in zip(a.splits, b.splits):
            np.testing.assert_array_equal(x1, x2)
            np.testing.assert_array_equal(y1, y2)

    def test_partitions(self):
        plan = make_splits(100, 5, seed=0)
        assert plan.n_cv == 5
        for tr, te in plan.splits:
            assert np.intersect1d(tr, te).size == 0
            np.testing.assert_array_equal(np.sort(np.concatenate([tr, te])), np.arange(100))

    def test_too_small(self):
        with pytest.raises(ValueError):
            make_splits(3)

    def test_default_grid(self):
        assert DEFAULT_GRID.size == 100
        assert DEFAULT_GRID[0] == -1.5 and DEFAULT_GRID[-1] == 5.0
        np.testing.assert_allclose(np.diff(default_grid()), 6.5 / 99)

    def test_caps(self):
        # n=41 -> halves 21 and 20 -> min(8, 8)
        np.testing.assert_array_equal(cv_caps(41, 12), np.minimum(np.arange(12), 8))


class TestLogMarginal:
    def profile(self, rng, n=20):
        X = rng.standard_normal((n, 4))
        return residual_profile(X, 3, 3)

    def test_gamma_free_at_zero(self, rng):
        prof = self.profile(rng)
        a = log_marginal_test(prof, 0, Hyperparameters(gamma=0.1))
        b = log_marginal_test(prof, 0, Hyperparameters(gamma=7.0))
        assert a == b

    def test_extended_precision(self, rng):
        mp.mp.dps = 40
        prof = self.profile(rng)
        hyper = Hyperparameters(gamma=0.3, nu0=1.5)
        n2 = prof.n
        for k in range(4):
            e = (n2 + mp.mpf(hyper.nu0)) / 2
            expected = (-mp.mpf(n2) / 2 * mp.log(2 * mp.pi) + mp.loggamma(e)
                        - mp.mpf(k) / 2 * mp.log(1 + 1 / mp.mpf(hyper.gamma))
                        - e * mp.log(mp.mpf(prof.dhat[k]) / 2))
            assert log_marginal_test(prof, k, hyper) == pytest.approx(float(expected), rel=1e-12)

    def test_doubling(self, rng):
        prof = self.profile(rng)
        hyper = Hyperparameters(nu0=2.0)
        before = log_marginal_test(prof, 2, hyper)
        prof.dhat[2] *= 2
        after = log_marginal_test(prof, 2, hyper)
        assert after - before == pytest.approx(-(prof.n + 2.0) / 2 * math.log(2), rel=1e-12)

    def test_degenerate(self, rng):
        X = rng.standard_normal((10, 3))
        X[:, 2] = X[:, 1]
        with pytest.raises(ValueError):
            log_marginal_test(residual_profile(X, 2, 2), 1, Hyperparameters())


def brute_force_lpd(X, c2, hyper, plan):
    """Sum over every joint bandwidth tuple, with residuals from lstsq."""
    n, p = X.shape
    caps = cv_caps(n, p, hyper.rmax)

    def dhat(Y, j, k):
        y = Y[:, j]
        if k == 0:
            return y @ y / Y.shape[0]
        Z = Y[:, j - k : j]
        r = y - Z @ np.linalg.lstsq(Z, y, rcond=None)[0]
        return r @ r / Y.shape[0]

    total = 0.0
    for tr, te in plan.splits:
        A, B = X[tr], X[te]
        n1, n2 = len(tr), len(te)
        logpost, logf = {}, {}
        for j in range(1, p):
            ks = range(caps[j] + 1)
            raw = np.array([
                -k * (math.log(hyper.c1) + c2 * math.log(p))
                - k / 2 * math.log(1 + hyper.alpha / hyper.gamma)
                - (hyper.alpha * n1 + hyper.nu0) / 2 * math.log(dhat(A, j, k)) for k in ks
            ])
            logpost[j] = raw - logsumexp(raw)
            e = (n2 + hyper.nu0) / 2
            logf[j] = np.array([
                -n2 / 2 * math.log(2 * math.pi) + math.lgamma(e)
                - k / 2 * math.log(1 + 1 / hyper.gamma) - e * math.log(dhat(B, j, k) / 2)
                for k in ks
            ])
        terms = []
        for tup in itertools.product(*(range(caps[j] + 1) for j in range(1, p))):
            terms.append(sum(logpost[j][k] + logf[j][k] for j, k in zip(range(1, p), tup)))
        total += logsumexp(terms)
    return total


class TestLpd:
    def test_single_grid_point(self, rng):
        X = rng.standard_normal((30, 5))
        res = lpd_cv(X, [0.7])
        assert res.c2_best == 0.7 and res.lpd.shape == (1,)

    def test_null_pair_prefers_large_c2(self, rng):
        X = rng.standard_normal((200, 2))
        grid = default_grid(count=30)
        res = lpd_cv(X, grid, seed=2)
        assert res.c2_best >= 3.0
        assert np.all(np.diff(res.lpd[grid >= 2.0]) >= -1e-9)

    def test_profile_builds(self, rng):
        X = rng.standard_normal((40, 9))
        a = lpd_cv(X, default_grid(count=3), n_cv=4)
        b = lpd_cv(X, default_grid(count=50), n_cv=4)
        assert a.n_profile_builds == b.n_profile_builds == 2 * 4 * 8

    def test_ties_go_to_largest(self):
        # p=2 with rmax=0: every c2 gives the same lpd
        rng = np.random.default_rng(0)
        X = rng.standard_normal((20, 2))
        res = lpd_cv(X, [0.0, 1.0, 2.0], Hyperparameters(rmax=0))
        assert np.ptp(res.lpd) == 0 and res.c2_best == 2.0

    def test_degenerate_column_excluded(self, rng):
        X = rng.standard_normal((30, 5))
        X[:, 3] = X[:, 2]
        res = lpd_cv(X, [0.0, 1.0])
        assert res.excluded == [3]
        assert np.all(np.isfinite(res.lpd))

    def test_ridge_rejected(self, rng):
        with pytest.raises(ValueError):
            build_cache(rng.standard_normal((20, 3)), make_splits(20), Hyperparameters(ridge_c=1.0))

    def test_threads(self, rng):
        X = rng.standard_normal((40, 20))
        a = lpd_cv(X, default_grid(count=5), threads=1)
        b = lpd_cv(X, default_grid(count=5), threads=3)
        np.testing.assert_array_equal(a.lpd, b.lpd)


@st.composite
def instances(draw, max_n=60, max_p=12):
    n = draw(st.integers(12, max_n))
    p = draw(st.integers(2, max_p))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X[:, 1:] += rng.uniform(-0.8, 0.8) * X[:, :-1]
    return X, seed


class TestProperties:
    @given(instances(), st.floats(-1.5, 5.0))
    @settings(max_examples=30, deadline=None)
    def test_cache_equivalence(self, inst, c2):
        X, seed = inst
        hyper = Hyperparameters(nu0=1.0)
        plan = make_splits(X.shape[0], 3, seed)
        cached = lpd_cv(X, [c2], hyper, plan=plan).lpd[0]
        assert abs(cached - lpd_naive(X, c2, hyper, plan)) <= 1e-10

    @given(instances(max_n=40, max_p=4), st.floats(-1.0, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_factorization(self, inst, c2):
        X, seed = inst
        hyper = Hyperparameters(rmax=2, nu0=0.5)
        plan = make_splits(X.shape[0], 2, seed)
        got = lpd_cv(X, [c2], hyper, plan=plan).lpd[0]
        assert got == pytest.approx(brute_force_lpd(X, c2, hyper, plan), abs=1e-10, rel=1e-12)
