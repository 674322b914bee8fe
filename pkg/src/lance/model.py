"""Core types for the varying-bandwidth modified Cholesky decomposition.

A precision matrix is written as ``Omega = (I - A)^T D^{-1} (I - A)`` with ``A``
strictly lower triangular and ``D`` diagonal.  Row ``j`` of ``A`` is nonzero only
on the ``k_j`` columns immediately preceding ``j``, so it is stored as a short
dense segment instead of a full row.

Columns are indexed from 0.  Column ``j`` therefore has ``j`` predecessors and
its bandwidth obeys ``0 <= k_j <= min(R_j, j)``; column 0 always has ``k_0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

__all__ = [
    "DENSE_CAP",
    "DataMatrix",
    "CholeskyModel",
    "Hyperparameters",
    "assemble_precision",
    "validate_bandwidths",
    "precision_logdet",
    "mcd_from_precision",
    "resolve_caps",
]

#: Largest ``p`` for which a dense precision matrix is materialized.
DENSE_CAP = 5000


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x p`` observation matrix with a fixed column ordering.

    ``means`` holds the column means that were subtracted when ``centered`` is
    true, so the same shift can be applied to held-out data.
    """

    values: np.ndarray
    centered: bool = False
    means: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got shape {values.shape}")
        n, p = values.shape
        if n < 2 or p < 2:
            raise ValueError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def center(self, means: np.ndarray | None = None) -> "DataMatrix":
        """Subtract ``means`` (default: this matrix's column means)."""
        if means is None:
            means = self.values.mean(axis=0)
        means = np.asarray(means, dtype=float)
        # centering an already centered matrix with its own means is a no-op
        # up to rounding, which keeps the operation idempotent
        base = self.means if self.means is not None else np.zeros(self.p)
        return DataMatrix(self.values - means, centered=True, means=base + means)


@dataclass(frozen=True)
class Hyperparameters:
    """Hyperparameters of the LANCE prior and its fractional posterior.

    ``rmax`` is the per-column bandwidth cap ``R_j``: ``None`` means the
    default ``floor(n/2) - 2``, an int applies to every column, and a sequence
    gives one cap per column.  ``ridge_c = 0`` selects the exact prior; a
    positive value selects the ridge-stabilized variant.
    """

    alpha: float = 0.99
    gamma: float = 0.1
    c1: float = 1.0
    c2: float = 1.0
    nu0: float = 0.0
    rmax: int | Sequence[int] | None = None
    ridge_c: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.c1 > 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")
        if not np.isfinite(self.c2):
            raise ValueError(f"c2 must be finite, got {self.c2}")
        if self.nu0 < 0:
            raise ValueError(f"nu0 must be non-negative, got {self.nu0}")
        if self.ridge_c < 0:
            raise ValueError(f"ridge_c must be non-negative, got {self.ridge_c}")
        if self.rmax is not None and np.any(np.asarray(self.rmax) < 0):
            raise ValueError("bandwidth caps must be non-negative")

    def replace(self, **changes) -> "Hyperparameters":
        params = {f: getattr(self, f) for f in self.__dataclass_fields__}
        params.update(changes)
        return Hyperparameters(**params)

    def to_dict(self) -> dict:
        rmax = self.rmax
        if rmax is not None and not np.isscalar(rmax):
            rmax = [int(r) for r in rmax]
        elif rmax is not None:
            rmax = int(rmax)
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "c1": self.c1,
            "c2": self.c2,
            "nu0": self.nu0,
            "rmax": rmax,
            "ridge_c": self.ridge_c,
        }


def resolve_caps(rmax, n: int, p: int) -> np.ndarray:
    """Per-column caps ``min(R_j, j)`` as an integer array of length ``p``."""
    if rmax is None:
        caps = np.full(p, max(n // 2 - 2, 0), dtype=int)
    elif np.isscalar(rmax):
        caps = np.full(p, int(rmax), dtype=int)
    else:
        caps = np.asarray(rmax, dtype=int)
        if caps.shape != (p,):
            raise ValueError(f"need {p} per-column caps, got {caps.shape}")
    return np.minimum(caps, np.arange(p))


def validate_bandwidths(k, rmax=None) -> list[tuple[int, int, int]]:
    """Return ``(j, k_j, bound)`` for every column violating ``0 <= k_j <= bound``.

    ``bound`` is ``min(R_j, j)``; with ``rmax=None`` only the predecessor
    count limits the bandwidth.  An empty list means the vector is valid.
    """
    k = np.asarray(k, dtype=int)
    p = k.shape[0]
    if rmax is None:
        bound = np.arange(p)
    else:
        bound = np.minimum(np.broadcast_to(np.asarray(rmax, dtype=int), (p,)), np.arange(p))
    bad = np.flatnonzero((k < 0) | (k > bound))
    return [(int(j), int(k[j]), int(bound[j])) for j in bad]


@dataclass(frozen=True)
class CholeskyModel:
    """Banded Cholesky factor ``A`` and innovation variances ``D``.

    ``bands[j]`` holds ``a_{j,l}`` for ``l = j - k_j, ..., j - 1`` in increasing
    column order; ``bands[0]`` is always empty.
    """

    bands: tuple
    d: np.ndarray
    _bandwidths: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bands = tuple(np.array(b, dtype=float).reshape(-1) for b in self.bands)
        d = np.array(self.d, dtype=float).reshape(-1)
        if len(bands) != d.shape[0]:
            raise ValueError(f"{len(bands)} bands for {d.shape[0]} variances")
        if np.any(~np.isfinite(d)) or np.any(d <= 0):
            bad = np.flatnonzero(~(d > 0))
            raise ValueError(f"variances must be positive; offending columns {bad.tolist()}")
        k = np.array([b.shape[0] for b in bands], dtype=int)
        violations = validate_bandwidths(k)
        if violations:
            raise ValueError(f"band segment longer than predecessor count: {violations}")
        for b in bands:
            b.setflags(write=False)
        d.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "_bandwidths", k)

    @classmethod
    def from_dense(cls, A, d, bandwidths=None) -> "CholeskyModel":
        """Build from a dense strictly lower-triangular ``A``.

        Without ``bandwidths`` each row's band extends to its leftmost nonzero.
        """
        A = np.asarray(A, dtype=float)
        p = A.shape[0]
        if bandwidths is None:
            bandwidths = np.zeros(p, dtype=int)
            for j in range(1, p):
                nz = np.flatnonzero(A[j, :j])
                bandwidths[j] = j - nz[0] if nz.size else 0
        bands = [A[j, j - int(bandwidths[j]):j] for j in range(p)]
        return cls(tuple(bands), d)

    @property
    def p(self) -> int:
        return self.d.shape[0]

    @property
    def bandwidths(self) -> np.ndarray:
        return self._bandwidths

    def dense_factor(self) -> np.ndarray:
        """The strictly lower-triangular ``p x p`` matrix ``A``."""
        A = np.zeros((self.p, self.p))
        for j, b in enumerate(self.bands):
            A[j, j - b.shape[0]:j] = b
        return A

    def support_mask(self) -> np.ndarray:
        """Boolean ``p x p`` mask of the in-band strictly-lower entries."""
        cols = np.arange(self.p)
        k = self.bandwidths[:, None]
        j = cols[:, None]
        return (cols[None, :] < j) & (cols[None, :] >= j - k)

    def whiten(self, x) -> np.ndarray:
        """Return ``D^{-1/2} (I - A) x`` for a vector or rows of a matrix."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        out = X.copy()
        for j, b in enumerate(self.bands):
            k = b.shape[0]
            if k:
                out[:, j] -= X[:, j - k:j] @ b
        out /= np.sqrt(self.d)
        return out[0] if single else out

    def matvec(self, v) -> np.ndarray:
        """``Omega @ v`` without forming ``Omega``."""
        w = self.whiten(v) / np.sqrt(self.d)
        # apply (I - A)^T
        out = w.copy()
        for j, b in enumerate(self.bands):
            k = b.shape[0]
            if k:
                out[j - k:j] -= b * w[j]
        return out

    def quad_form(self, x) -> np.ndarray:
        """``x^T Omega x`` for a vector or for each row of a matrix."""
        z = self.whiten(x)
        return np.sum(z * z, axis=-1)

    def logdet(self) -> float:
        return precision_logdet(self)

    def precision(self, cap: int = DENSE_CAP) -> np.ndarray:
        return assemble_precision(self, cap=cap)


def assemble_precision(model: CholeskyModel, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``(I - A)^T D^{-1} (I - A)``, symmetrized.

    Raises ``ValueError`` when ``p`` exceeds ``cap``; use ``model.matvec``
    for large problems.
    """
    if model.p > cap:
        raise ValueError(f"p={model.p} exceeds dense assembly cap {cap}; use matvec")
    U = np.eye(model.p) - model.dense_factor()
    omega = U.T @ (U / model.d[:, None])
    return 0.5 * (omega + omega.T)


def precision_logdet(model: CholeskyModel) -> float:
    """``log det Omega = -sum_j log d_j`` (``I - A`` is unit triangular)."""
    return -float(np.sum(np.log(model.d)))


def mcd_from_precision(omega, tol: float = 0.0) -> CholeskyModel:
    """Exact modified Cholesky decomposition of a dense SPD matrix.

    Entries of ``A`` with magnitude at most ``tol`` are treated as zero when
    deciding each row's bandwidth.
    """
    omega = np.asarray(omega, dtype=float)
    # Omega = L^T L with L lower triangular is a standard Cholesky of the
    # index-reversed matrix
    rev = omega[::-1, ::-1]
    C = la.cholesky(rev, lower=True)
    L = C.T[::-1, ::-1]
    diag = np.diag(L)
    d = 1.0 / diag**2
    A = -L / diag[:, None]
    np.fill_diagonal(A, 0.0)
    if tol > 0:
        A[np.abs(A) <= tol] = 0.0
    return CholeskyModel.from_dense(A, d)
