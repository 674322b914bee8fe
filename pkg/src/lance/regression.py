"""Residual-variance profiles of each column regressed on its nearest predecessors.

For column ``j`` and every bandwidth ``k = 0..K`` we need

    dhat[k] = |x_j - P_k x_j|^2 / n

where ``P_k`` projects onto the ``k`` columns immediately to the left of ``j``.
All of these come out of a single Cholesky factorization of the predecessor
Gram matrix taken in nearest-first order (``j-1, j-2, ..., j-K``): the leading
``k x k`` block of that factor is the factor of the size-``k`` Gram matrix, so
with ``z = L^{-1} X^T x_j`` we get ``|P_k x_j|^2 = sum_{i<k} z_i^2``.

The Gram entries themselves are read from a banded cross-product table that is
built once per data matrix, so a full set of profiles costs ``O(n p K)`` for the
table plus ``O(K^3)`` per column.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

__all__ = [
    "PIVOT_RTOL",
    "DEGENERATE_RTOL",
    "SingularGramError",
    "BandProfile",
    "banded_gram",
    "residual_profile",
    "band_profiles",
    "coefficients_at",
    "cov_factor_at",
    "ridge_shift",
]

PIVOT_RTOL = 1e-12
DEGENERATE_RTOL = 1e-12


class SingularGramError(np.linalg.LinAlgError):
    """Requested bandwidth lies beyond a singular predecessor Gram matrix."""


def ridge_shift(ridge_c: float, alpha: float, gamma: float) -> float:
    """Diagonal shift of the posterior Gram matrix under the ridge prior."""
    return ridge_c * gamma / (alpha + gamma)


def banded_gram(X, K: int) -> np.ndarray:
    """Cross products ``G[j, l] = x_j . x_{j-l}`` for ``l = 0..K``.

    Entries with ``j - l < 0`` are zero.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    K = min(int(K), p - 1)
    G = np.zeros((p, K + 1))
    for lag in range(K + 1):
        G[lag:, lag] = np.einsum("ij,ij->j", X[:, lag:], X[:, : p - lag])
    return G


@dataclass
class BandProfile:
    """Residual variances of column ``j`` for bandwidths ``0..K``.

    ``K`` is the largest bandwidth actually available; it falls below
    ``K_requested`` when the predecessor Gram matrix became numerically
    singular (``truncated``).  Entries flagged in ``degenerate`` are exact
    fits (zero residual) and are stored as 0.

    ``log_det_ratio[k]`` is ``log det{(G_k + cI)^{-1}(G_k + sI)}`` for the ridge
    variant and zero otherwise.
    """

    j: int
    n: int
    dhat: np.ndarray
    K_requested: int
    chol: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    shift: float = 0.0
    ridge_c: float = 0.0
    log_det_ratio: np.ndarray | None = field(default=None, repr=False)
    degenerate: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.log_det_ratio is None:
            self.log_det_ratio = np.zeros_like(self.dhat)
        if self.degenerate is None:
            self.degenerate = np.zeros(self.dhat.shape, dtype=bool)

    @property
    def K(self) -> int:
        return self.dhat.shape[0] - 1

    @property
    def truncated(self) -> bool:
        return self.K < self.K_requested

    def coefficients(self, k: int) -> np.ndarray:
        return coefficients_at(self, k)

    def cov_factor(self, k: int, scale: float = 1.0) -> np.ndarray:
        return cov_factor_at(self, k, scale)


def _gram_block(G: np.ndarray, j: int, K: int):
    """Nearest-first predecessor Gram ``(K x K)`` and cross products with ``x_j``."""
    idx = j - 1 - np.arange(K)
    lag = np.abs(idx[:, None] - idx[None, :])
    hi = np.maximum(idx[:, None], idx[None, :])
    return G[hi, lag], G[j, 1 : K + 1].copy(), G[j, 0]


def _chol_prefix(M: np.ndarray, rtol: float) -> np.ndarray:
    """Cholesky factor of the largest well-conditioned leading block of ``M``."""
    K = M.shape[0]
    if K == 0:
        return np.zeros((0, 0))
    L, info = lapack.dpotrf(M, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        # leading minor of order ``info`` failed; retry on the block before it
        return _chol_prefix(M[: info - 1, : info - 1], rtol)
    if info < 0:
        raise ValueError(f"dpotrf argument error {info}")
    pivots = np.diag(L) ** 2
    scale = np.diag(M)
    bad = np.flatnonzero(pivots <= rtol * np.maximum(scale, np.finfo(float).tiny))
    if bad.size:
        keep = int(bad[0])
        return L[:keep, :keep].copy()
    return L


def _profile_from_gram(G, j, K, n, ridge_c, alpha, gamma, label=None) -> BandProfile:
    K = min(int(K), j)
    C, b, yy = _gram_block(G, j, K)
    shift = ridge_shift(ridge_c, alpha, gamma) if ridge_c > 0 else 0.0
    L = _chol_prefix(C + shift * np.eye(K), PIVOT_RTOL)
    Kf = L.shape[0]
    z = la.solve_triangular(L, b[:Kf], lower=True) if Kf else np.zeros(0)
    explained = np.concatenate(([0.0], np.cumsum(z * z)))
    rss = yy - explained

    log_det_ratio = np.zeros(Kf + 1)
    if ridge_c > 0:
        Lc = _chol_prefix(C[:Kf, :Kf] + ridge_c * np.eye(Kf), PIVOT_RTOL)
        zc = la.solve_triangular(Lc, b[:Kf], lower=True)
        explained_c = np.concatenate(([0.0], np.cumsum(zc * zc)))
        # minimum of alpha|y - Xa|^2 + gamma|a - m_c|^2_{G+cI}, divided by alpha
        rss = rss - gamma / alpha * (explained - explained_c)
        log_det_ratio[1:] = 2.0 * np.cumsum(np.log(np.diag(L)) - np.log(np.diag(Lc)))

    dhat = rss / n
    floor = DEGENERATE_RTOL * yy / n
    degenerate = dhat <= floor
    if degenerate.any():
        # once the fit is exact every larger model is exact as well
        first = int(np.argmax(degenerate))
        if ridge_c == 0:
            degenerate[first:] = True
        dhat = np.where(degenerate, 0.0, dhat)
    return BandProfile(
        j=j if label is None else label,
        n=n,
        dhat=dhat,
        K_requested=K,
        chol=L,
        z=z,
        shift=shift,
        ridge_c=ridge_c,
        log_det_ratio=log_det_ratio,
        degenerate=degenerate,
    )


def residual_profile(X, j: int, K: int, ridge_c: float = 0.0, alpha: float = 0.99,
                     gamma: float = 0.1) -> BandProfile:
    """Profile of column ``j`` regressed on up to ``K`` nearest predecessors.

    With ``ridge_c > 0`` the residual variances are the ridge-stabilized ones,
    which depend on ``alpha`` and ``gamma`` through the posterior shrinkage.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 0 <= j < p:
        raise IndexError(f"column {j} out of range for p={p}")
    K = min(int(K), j)
    if K < 0:
        raise ValueError("K must be non-negative")
    if ridge_c == 0 and K >= n:
        raise ValueError(f"K={K} >= n={n}: the Gram matrix cannot be invertible")
    cols = X[:, j - K : j + 1]
    G = banded_gram(cols, K)
    return _profile_from_gram(G, K, K, n, ridge_c, alpha, gamma, label=j)


def band_profiles(X, caps, ridge_c: float = 0.0, alpha: float = 0.99,
                  gamma: float = 0.1, columns=None, threads: int = 1) -> list[BandProfile]:
    """Profiles for ``columns`` (default ``1..p-1``) with per-column caps.

    ``caps[j]`` bounds the bandwidth of column ``j``.  Columns are independent,
    so ``threads > 1`` farms them out without changing any result.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    caps = np.minimum(np.asarray(caps, dtype=int), np.arange(p))
    if columns is None:
        columns = range(1, p)
    columns = list(columns)
    if ridge_c == 0 and columns and caps[columns].max() >= n:
        raise ValueError(f"bandwidth cap {caps[columns].max()} >= n={n} without ridge")
    G = banded_gram(X, int(caps[columns].max()) if columns else 0)

    def build(j):
        return _profile_from_gram(G, j, caps[j], n, ridge_c, alpha, gamma)

    if threads > 1 and len(columns) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, columns))
    return [build(j) for j in columns]


def coefficients_at(profile: BandProfile, k: int) -> np.ndarray:
    """Regression coefficients of column ``j`` on its ``k`` nearest predecessors.

    Returned in increasing column order (``j-k, ..., j-1``).  For a ridge
    profile this is the posterior mean ``(G + sI)^{-1} X^T x_j``.
    """
    _check_k(profile, k)
    if k == 0:
        return np.zeros(0)
    a = la.solve_triangular(profile.chol[:k, :k], profile.z[:k], lower=True, trans="T")
    return a[::-1].copy()


def cov_factor_at(profile: BandProfile, k: int, scale: float = 1.0) -> np.ndarray:
    """Lower-triangular ``F`` with ``F F^T = scale * (G_k + shift I)^{-1}``.

    Rows and columns follow the increasing column order of ``coefficients_at``.
    """
    _check_k(profile, k)
    if k == 0:
        return np.zeros((0, 0))
    Linv = la.solve_triangular(profile.chol[:k, :k], np.eye(k), lower=True)
    # Linv^T is upper triangular in nearest-first order; reversing both axes
    # makes it lower triangular in natural column order
    return np.sqrt(scale) * Linv.T[::-1, ::-1]


def _check_k(profile: BandProfile, k: int) -> None:
    if k < 0:
        raise ValueError("bandwidth must be non-negative")
    if k > profile.K:
        if k <= profile.K_requested:
            raise SingularGramError(
                f"column {profile.j}: Gram matrix singular beyond k={profile.K}")
        raise ValueError(f"k={k} exceeds computed profile (K={profile.K})")
