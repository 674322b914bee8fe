"""Fractional posterior of the LANCE prior.

Every column ``j >= 1`` is an independent conjugate regression, so the
posterior factorizes over columns:

* ``k_j`` has a closed-form categorical posterior driven by the residual
  variances ``dhat_j^{(k)}`` of the column's profile;
* ``d_j | k_j`` is inverse-gamma with shape ``(alpha n + nu0) / 2`` and scale
  ``alpha n dhat / 2``;
* ``a_j | d_j, k_j`` is normal around the least-squares (or ridge) fit with
  covariance ``d_j / (alpha + gamma) * (G_k + s I)^{-1}``.

All weights are computed in log space.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import CholeskyModel, Hyperparameters, resolve_caps
from .regression import BandProfile, band_profiles, coefficients_at, cov_factor_at

__all__ = [
    "DegenerateProfileError",
    "BandwidthPosterior",
    "FitReport",
    "PosteriorDraws",
    "log_weight_base",
    "bandwidth_log_posterior",
    "fit_from_profiles",
    "select_bandwidths",
    "ridge_fit",
    "sample_posterior",
    "column_rng",
]


class DegenerateProfileError(ValueError):
    """No bandwidth of a column has a well-defined posterior weight."""


def log_weight_base(profile: BandProfile, hyper: Hyperparameters, n: int,
                    cap: int | None = None) -> np.ndarray:
    """Unnormalized log weights of ``k = 0..K`` without the ``c2`` term.

    Degenerate bandwidths and those above ``cap`` get ``-inf``.  The full log
    weight is ``base[k] - k * c2 * log(p)``.
    """
    K = profile.K if cap is None else min(profile.K, cap)
    ks = np.arange(K + 1)
    dhat = profile.dhat[: K + 1]
    ok = ~profile.degenerate[: K + 1]
    base = np.full(K + 1, -np.inf)
    expo = 0.5 * (hyper.alpha * n + hyper.nu0)
    base[ok] = (
        -ks[ok] * math.log(hyper.c1)
        - 0.5 * ks[ok] * math.log1p(hyper.alpha / hyper.gamma)
        - expo * np.log(dhat[ok])
        - 0.5 * profile.log_det_ratio[: K + 1][ok]
    )
    return base


@dataclass
class BandwidthPosterior:
    """Posterior over the bandwidth of column ``j``.

    ``log_weights`` is normalized; excluded (degenerate) bandwidths carry
    ``-inf``.
    """

    j: int
    log_weights: np.ndarray
    hyper: Hyperparameters
    excluded: list = field(default_factory=list)

    @property
    def mode(self) -> int:
        # np.argmax returns the first maximizer, i.e. the smallest k on ties
        return int(np.argmax(self.log_weights))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def mean(self) -> float:
        return float(np.dot(self.weights, np.arange(self.log_weights.shape[0])))


def _normalize(base: np.ndarray, ks: np.ndarray, c2: float, logp: float) -> np.ndarray:
    lw = base - ks * (c2 * logp)
    return lw - logsumexp(lw)


def bandwidth_log_posterior(profile: BandProfile, hyper: Hyperparameters, n: int,
                            p: int, cap: int | None = None) -> BandwidthPosterior:
    """Normalized posterior over ``k_j`` for one column.

    ``n`` is the sample size the profile was computed on and ``p`` the total
    number of variables (it enters the prior penalty ``p^{-c2 k}``).
    """
    if hyper.alpha * n + hyper.nu0 <= 0:
        raise ValueError("alpha * n + nu0 must be positive")
    base = log_weight_base(profile, hyper, n, cap)
    if base.size == 0 or not np.isfinite(base).any():
        raise DegenerateProfileError(f"column {profile.j}: every bandwidth is degenerate")
    ks = np.arange(base.shape[0])
    excluded = [int(k) for k in np.flatnonzero(~np.isfinite(base))]
    lw = _normalize(base, ks, hyper.c2, math.log(p))
    return BandwidthPosterior(profile.j, lw, hyper, excluded)


@dataclass
class FitReport:
    """Posterior-mode fit of every column.

    ``bands[j]`` is the coefficient segment at the selected bandwidth (in
    increasing column order) and ``d_hat[j]`` the matching residual variance.
    ``posteriors[0]`` is ``None`` because column 0 has no predecessors.
    Columns whose profile is entirely degenerate are listed in
    ``diagnostics["failed"]`` and carry ``d_hat = nan``.
    """

    n: int
    p: int
    bandwidths: np.ndarray
    bands: list
    d_hat: np.ndarray
    posteriors: list
    hyper: Hyperparameters
    diagnostics: dict
    seed: int | None = None
    timings: dict = field(default_factory=dict)

    @property
    def failed(self) -> list:
        return self.diagnostics.get("failed", [])

    @property
    def model(self) -> CholeskyModel:
        if self.failed:
            raise DegenerateProfileError(f"degenerate columns {self.failed}")
        return CholeskyModel(tuple(self.bands), self.d_hat)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "bandwidths": [int(k) for k in self.bandwidths],
            "coefficients": [[float(v) for v in b] for b in self.bands],
            "variances": [None if not np.isfinite(d) else float(d) for d in self.d_hat],
            "posterior_mean_bandwidth": [
                None if post is None else post.mean() for post in self.posteriors
            ],
            "posterior_mode_probability": [
                None if post is None else float(post.weights[post.mode])
                for post in self.posteriors
            ],
            "hyperparameters": self.hyper.to_dict(),
            "diagnostics": self.diagnostics,
            "seed": self.seed,
        }


def fit_from_profiles(profiles, x0_sq: float, n: int, p: int,
                      hyper: Hyperparameters, caps=None) -> FitReport:
    """Assemble a ``FitReport`` from precomputed column profiles.

    ``profiles`` covers columns ``1..p-1`` in order and ``x0_sq`` is
    ``|x_0|^2``.  Profiles do not depend on ``c2``, which is what lets a
    hyperparameter sweep reuse them.
    """
    bandwidths = np.zeros(p, dtype=int)
    bands = [np.zeros(0)]
    d_hat = np.empty(p)
    d_hat[0] = x0_sq / n
    posteriors = [None]
    diag = {"truncated": {}, "degenerate": {}, "failed": []}
    if not d_hat[0] > 0:
        diag["failed"].append(0)
        d_hat[0] = np.nan
    for prof in profiles:
        j = prof.j
        cap = None if caps is None else int(caps[j])
        if prof.truncated:
            diag["truncated"][str(j)] = prof.K
        try:
            post = bandwidth_log_posterior(prof, hyper, n, p, cap)
        except DegenerateProfileError:
            diag["failed"].append(j)
            posteriors.append(None)
            bands.append(np.zeros(0))
            d_hat[j] = np.nan
            continue
        if post.excluded:
            diag["degenerate"][str(j)] = post.excluded
        k = post.mode
        bandwidths[j] = k
        bands.append(coefficients_at(prof, k))
        d_hat[j] = prof.dhat[k]
        posteriors.append(post)
    return FitReport(n, p, bandwidths, bands, d_hat, posteriors, hyper, diag)


def select_bandwidths(X, hyper: Hyperparameters | None = None, threads: int = 1,
                      profiles=None) -> FitReport:
    """Posterior-mode bandwidths, coefficients and variances for every column.

    The result is a deterministic function of ``(X, hyper)``; ``threads`` only
    changes how the column profiles are scheduled.
    """
    hyper = Hyperparameters() if hyper is None else hyper
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains non-finite values")
    n, p = X.shape
    caps = resolve_caps(hyper.rmax, n, p)
    t0 = time.perf_counter()
    if profiles is None:
        profiles = band_profiles(X, caps, hyper.ridge_c, hyper.alpha, hyper.gamma,
                                 threads=threads)
    t1 = time.perf_counter()
    report = fit_from_profiles(profiles, float(X[:, 0] @ X[:, 0]), n, p, hyper, caps)
    report.timings = {"profiles": t1 - t0, "posterior": time.perf_counter() - t1}
    return report


def ridge_fit(X, hyper: Hyperparameters, threads: int = 1) -> FitReport:
    """Fit under the ridge-stabilized prior; bandwidths may exceed ``n``."""
    if not hyper.ridge_c > 0:
        raise ValueError(f"ridge_fit needs ridge_c > 0, got {hyper.ridge_c}")
    return select_bandwidths(X, hyper, threads=threads)


def column_rng(seed: int, j: int) -> np.random.Generator:
    """Independent generator for column ``j``; stable under any scheduling."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))


@dataclass
class PosteriorDraws:
    """Joint posterior draws.

    ``k`` and ``d`` have shape ``(n_draws, p)``.  ``a[j]`` has shape
    ``(n_draws, K_j)`` in lag order: ``a[j][s, m]`` multiplies column
    ``j - 1 - m`` and is zero for ``m >= k[s, j]``.
    """

    k: np.ndarray
    d: np.ndarray
    a: list
    seed: int

    @property
    def n_draws(self) -> int:
        return self.k.shape[0]

    def model(self, s: int) -> CholeskyModel:
        bands = [self.a[j][s, : self.k[s, j]][::-1] for j in range(self.k.shape[1])]
        return CholeskyModel(tuple(bands), self.d[s])


def _draw_column(prof, post, dhat0, n, hyper, n_draws, rng):
    shape = 0.5 * (hyper.alpha * n + hyper.nu0)
    if prof is None:
        scale = 0.5 * hyper.alpha * n * dhat0
        d = scale / rng.gamma(shape, size=n_draws)
        return np.zeros(n_draws, dtype=int), d, np.zeros((n_draws, 0))
    ks = rng.choice(post.log_weights.shape[0], size=n_draws, p=post.weights / post.weights.sum())
    d = np.empty(n_draws)
    a = np.zeros((n_draws, post.log_weights.shape[0] - 1))
    for k in np.unique(ks):
        rows = np.flatnonzero(ks == k)
        scale = 0.5 * hyper.alpha * n * prof.dhat[k]
        d[rows] = scale / rng.gamma(shape, size=rows.size)
        if k == 0:
            continue
        mean = coefficients_at(prof, k)
        F = cov_factor_at(prof, k, 1.0 / (hyper.alpha + hyper.gamma))
        eps = rng.standard_normal((rows.size, k))
        draws = mean + np.sqrt(d[rows])[:, None] * (eps @ F.T)
        a[rows, :k] = draws[:, ::-1]
    return ks, d, a


def sample_posterior(X, hyper: Hyperparameters | None = None, n_draws: int = 1000,
                     seed: int = 0, threads: int = 1) -> PosteriorDraws:
    """Exact joint draws of ``(k_j, d_j, a_j)`` for every column.

    Each column uses its own random stream keyed by ``(seed, j)``, so draws
    do not depend on ``threads``.
    """
    hyper = Hyperparameters() if hyper is None else hyper
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    caps = resolve_caps(hyper.rmax, n, p)
    profiles = band_profiles(X, caps, hyper.ridge_c, hyper.alpha, hyper.gamma, threads=threads)
    fit = fit_from_profiles(profiles, float(X[:, 0] @ X[:, 0]), n, p, hyper, caps)
    if fit.failed:
        raise DegenerateProfileError(f"degenerate columns {fit.failed}")
    work = [(None, None)] + list(zip(profiles, fit.posteriors[1:]))

    def draw(j):
        prof, post = work[j]
        return _draw_column(prof, post, fit.d_hat[0], n, hyper, n_draws, column_rng(seed, j))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(draw, range(p)))
    else:
        cols = [draw(j) for j in range(p)]
    k = np.stack([c[0] for c in cols], axis=1)
    d = np.stack([c[1] for c in cols], axis=1)
    return PosteriorDraws(k, d, [c[2] for c in cols], seed)
