"""Bayesian cross-validation of the penalty exponent ``c2``.

For each random half split the held-out log predictive density is

    sum_j log sum_k f_j(X_test | k) * pi_{alpha, c2}(k | X_train)

where both factors are per-column closed forms.  Neither residual-variance
profile depends on ``c2``, so they are computed once per split and reused for
every grid value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import Hyperparameters, resolve_caps
from .posterior import log_weight_base
from .regression import BandProfile, band_profiles, residual_profile

__all__ = [
    "DEFAULT_GRID",
    "default_grid",
    "SplitPlan",
    "CvCache",
    "CvResult",
    "make_splits",
    "cv_caps",
    "log_marginal_test",
    "build_cache",
    "lpd_cv",
    "lpd_naive",
]


def default_grid(lo: float = -1.5, hi: float = 5.0, count: int = 100) -> np.ndarray:
    return np.linspace(lo, hi, count)


DEFAULT_GRID = default_grid()


@dataclass(frozen=True)
class SplitPlan:
    """Random train/test halves; train has ``ceil(n/2)`` rows."""

    n: int
    splits: tuple
    seed: int | None

    @property
    def n_cv(self) -> int:
        return len(self.splits)


def make_splits(n: int, n_cv: int = 5, seed: int | None = 0) -> SplitPlan:
    if n < 4:
        raise ValueError(f"need n >= 4 to split, got {n}")
    if n_cv < 1:
        raise ValueError("n_cv must be at least 1")
    rng = np.random.default_rng(seed)
    n1 = -(-n // 2)
    splits = []
    for _ in range(n_cv):
        perm = rng.permutation(n)
        splits.append((np.sort(perm[:n1]), np.sort(perm[n1:])))
    return SplitPlan(n, tuple(splits), seed)


def cv_caps(n: int, p: int, rmax=None) -> np.ndarray:
    """Bandwidth caps valid on both halves of every split."""
    n1, n2 = -(-n // 2), n // 2
    half = max(min(n1 // 2 - 2, n2 // 2 - 2), 0)
    return np.minimum(resolve_caps(rmax, n, p), half)


def _log_marginal_terms(dhat: np.ndarray, gamma: float, nu0: float, n2: int) -> np.ndarray:
    ks = np.arange(dhat.shape[0])
    expo = 0.5 * (n2 + nu0)
    with np.errstate(divide="ignore"):
        return (
            -0.5 * n2 * math.log(2 * math.pi)
            + gammaln(expo)
            - 0.5 * ks * math.log1p(1.0 / gamma)
            - expo * np.log(dhat / 2.0)
        )


def log_marginal_test(profile_test: BandProfile, k: int, hyper: Hyperparameters,
                      n2: int | None = None) -> float:
    """Log marginal likelihood factor of one column of the held-out half."""
    n2 = profile_test.n if n2 is None else n2
    if profile_test.degenerate[k] or not profile_test.dhat[k] > 0:
        raise ValueError(f"column {profile_test.j}: degenerate test variance at k={k}")
    return float(_log_marginal_terms(profile_test.dhat[: k + 1], hyper.gamma, hyper.nu0, n2)[k])


@dataclass
class CvCache:
    """Per-split train and test profiles, independent of ``c2``."""

    plan: SplitPlan
    p: int
    caps: np.ndarray
    train: list
    test: list
    n_profile_builds: int
    excluded: list = field(default_factory=list)


def build_cache(X, plan: SplitPlan, hyper: Hyperparameters, threads: int = 1) -> CvCache:
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if hyper.ridge_c > 0:
        raise ValueError("cross-validation is defined for the exact prior (ridge_c = 0)")
    caps = cv_caps(n, p, hyper.rmax)
    train, test = [], []
    builds = 0
    for idx1, idx2 in plan.splits:
        tr = band_profiles(X[idx1], caps, 0.0, hyper.alpha, hyper.gamma, threads=threads)
        te = band_profiles(X[idx2], caps, 0.0, hyper.alpha, hyper.gamma, threads=threads)
        builds += len(tr) + len(te)
        train.append(tr)
        test.append(te)
    excluded = sorted({
        prof.j
        for split in train + test
        for prof in split
        if prof.degenerate[: caps[prof.j] + 1].any()
    })
    return CvCache(plan, p, caps, train, test, builds, excluded)


def _split_tables(cache: CvCache, nu: int, hyper: Hyperparameters):
    """Padded ``(columns, K+1)`` arrays of train log-weight bases and test terms."""
    idx1, idx2 = cache.plan.splits[nu]
    n1, n2 = idx1.shape[0], idx2.shape[0]
    skip = set(cache.excluded)
    rows = [(tr, te) for tr, te in zip(cache.train[nu], cache.test[nu]) if tr.j not in skip]
    width = 1 + max((min(tr.K, te.K) for tr, te in rows), default=0)
    base = np.full((len(rows), width), -np.inf)
    marg = np.full((len(rows), width), -np.inf)
    for r, (tr, te) in enumerate(rows):
        K = min(tr.K, te.K, int(cache.caps[tr.j]))
        base[r, : K + 1] = log_weight_base(tr, hyper, n1, K)
        marg[r, : K + 1] = _log_marginal_terms(te.dhat[: K + 1], hyper.gamma, hyper.nu0, n2)
    return base, marg


def _lpd_split(base: np.ndarray, marg: np.ndarray, c2: float, logp: float) -> float:
    ks = np.arange(base.shape[1])
    lw = base - ks * (c2 * logp)
    lw = lw - logsumexp(lw, axis=1, keepdims=True)
    return float(np.sum(logsumexp(lw + marg, axis=1)))


@dataclass
class CvResult:
    c2_grid: np.ndarray
    lpd: np.ndarray
    c2_best: float
    n_profile_builds: int
    excluded: list
    plan: SplitPlan

    def table(self) -> list[tuple[float, float]]:
        return [(float(c), float(v)) for c, v in zip(self.c2_grid, self.lpd)]


def _argmax_largest(grid: np.ndarray, values: np.ndarray) -> float:
    best = np.max(values)
    ties = np.flatnonzero(values == best)
    return float(np.max(grid[ties]))


def lpd_cv(X, c2_grid=None, hyper_base: Hyperparameters | None = None,
           plan: SplitPlan | None = None, n_cv: int = 5, seed: int | None = 0,
           threads: int = 1, cache: CvCache | None = None) -> CvResult:
    """Log predictive density over ``c2_grid`` and its maximizer.

    Ties at the maximum resolve to the largest ``c2`` (the sparser model).
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    hyper = Hyperparameters() if hyper_base is None else hyper_base
    grid = DEFAULT_GRID if c2_grid is None else np.asarray(c2_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("empty c2 grid")
    if cache is None:
        plan = make_splits(n, n_cv, seed) if plan is None else plan
        cache = build_cache(X, plan, hyper, threads)
    logp = math.log(p)
    tables = [_split_tables(cache, nu, hyper) for nu in range(cache.plan.n_cv)]
    lpd = np.array([
        sum(_lpd_split(base, marg, c2, logp) for base, marg in tables) for c2 in grid
    ])
    return CvResult(grid, lpd, _argmax_largest(grid, lpd), cache.n_profile_builds,
                    cache.excluded, cache.plan)


def lpd_naive(X, c2: float, hyper_base: Hyperparameters, plan: SplitPlan) -> float:
    """Reference lpd at a single ``c2`` that rebuilds every profile column by column."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    caps = cv_caps(n, p, hyper_base.rmax)
    train, test = [], []
    for idx1, idx2 in plan.splits:
        train.append([residual_profile(X[idx1], j, caps[j], 0.0, hyper_base.alpha,
                                       hyper_base.gamma) for j in range(1, p)])
        test.append([residual_profile(X[idx2], j, caps[j], 0.0, hyper_base.alpha,
                                      hyper_base.gamma) for j in range(1, p)])
    excluded = sorted({
        prof.j for split in train + test for prof in split
        if prof.degenerate[: caps[prof.j] + 1].any()
    })
    cache = CvCache(plan, p, caps, train, test, 2 * plan.n_cv * (p - 1), excluded)
    return lpd_cv(X, [c2], hyper_base, cache=cache).lpd[0]
