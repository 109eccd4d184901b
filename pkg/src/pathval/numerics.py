"""Deterministic numerical primitives: PSD factorization, seedable RNG
streams, Gaussian sampling, distribution functions, and sample moments.

Every function here is a pure function of its inputs (the RNG stream state
included), so repeated calls with identical inputs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import (
    EmptyInputError,
    NotSymmetricError,
    OutOfRangeError,
    RepairExceededError,
    SizeMismatchError,
)

__all__ = [
    "PsdFactor",
    "RngStream",
    "cholesky_psd",
    "sample_mvn",
    "std_normal_cdf",
    "std_normal_quantile",
    "chi_square_quantile",
    "mean_and_cov",
    "empirical_quantile",
]

# Fraction of trace(M) that eigenvalue clipping may remove under the
# default "strict" repair policy.
REPAIR_TOLERANCE = 1e-6


class RngStream:
    """One deterministic random stream out of a keyed family.

    A stream is identified by ``(seed, index)`` plus the chain of
    :meth:`child` calls that produced it. The same identity always yields
    the same sequence, independently of platform or thread count; distinct
    identities yield statistically independent streams (counter-based
    Philox keyed through ``SeedSequence`` spawn keys).

    A stream instance is stateful and single-owner: construct a fresh one
    (or a fresh child) per consumer instead of sharing.
    """

    def __init__(self, seed: int, index: int = 0, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.index = int(index)
        self._path = tuple(int(p) for p in _path)
        key = np.random.SeedSequence(entropy=self.seed, spawn_key=(*self._path, self.index))
        self._generator = np.random.Generator(np.random.Philox(key))

    def child(self, index: int) -> "RngStream":
        """Derive an independent sub-stream; deterministic in (self, index)."""
        return RngStream(self.seed, index, (*self._path, self.index))

    def standard_normal(self, shape) -> np.ndarray:
        return self._generator.standard_normal(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._generator.uniform(low, high, shape)

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.seed}, index={self.index}, path={self._path})"


@dataclass(frozen=True)
class PsdFactor:
    """Square root ``L`` of a (possibly repaired) PSD matrix, ``L @ L.T == matrix``.

    ``lower`` is lower-triangular when the plain Cholesky succeeded and a
    general square root after eigenvalue repair. ``clipped_mass`` is the
    total magnitude of negative eigenvalues removed by the repair (zero on
    the plain path).
    """

    lower: np.ndarray
    matrix: np.ndarray
    rank: int
    clipped_mass: float
    _eigvals: np.ndarray | None = field(default=None, repr=False)
    _eigvecs: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def pinv_apply(self, v: np.ndarray) -> np.ndarray:
        """Apply the (pseudo-)inverse of ``matrix`` to a vector or to the
        columns of a matrix."""
        if self._eigvals is None:
            # full-rank triangular path
            y = np.linalg.solve(self.lower, v)
            return np.linalg.solve(self.lower.T, y)
        w, vecs = self._eigvals, self._eigvecs
        inv = np.where(w > 0, 1.0 / np.where(w > 0, w, 1.0), 0.0)
        t = vecs.T @ v
        t = t * (inv[:, None] if t.ndim == 2 else inv)
        return vecs @ t

    def pinv_residual(self, v: np.ndarray) -> float:
        """Relative residual of solving ``matrix @ u = v``; nonzero only when
        ``v`` leaves the column space of a rank-deficient matrix."""
        u = self.pinv_apply(v)
        denom = float(np.linalg.norm(v))
        if denom == 0.0:
            return 0.0
        return float(np.linalg.norm(self.matrix @ u - v)) / denom


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {m.shape}")
    scale = 1.0 + float(np.abs(m).max(initial=0.0))
    if float(np.abs(m - m.T).max(initial=0.0)) > 1e-10 * scale:
        raise NotSymmetricError("matrix is not symmetric within 1e-10 relative tolerance")
    return 0.5 * (m + m.T)


def cholesky_psd(m: np.ndarray, policy: str = "strict") -> PsdFactor:
    """Factor a symmetric PSD matrix, repairing small indefiniteness.

    Plain Cholesky is attempted first. On failure the matrix is
    eigen-decomposed, negative eigenvalues are clipped to zero, and the
    factor of the repaired matrix is returned, with the clipped mass
    reported in the diagnostics.

    Parameters
    ----------
    m : array
        Symmetric matrix (checked to 1e-10 relative tolerance).
    policy : {"strict", "force"}
        "strict" raises :class:`RepairExceededError` when the clipped mass
        exceeds ``1e-6 * trace(m)``; "force" always repairs.
    """
    if policy not in ("strict", "force"):
        raise OutOfRangeError(f"unknown repair policy {policy!r}")
    sym = _check_symmetric(m)
    try:
        lower = np.linalg.cholesky(sym)
        return PsdFactor(lower=lower, matrix=sym, rank=sym.shape[0], clipped_mass=0.0)
    except np.linalg.LinAlgError:
        pass
    eigvals, eigvecs = np.linalg.eigh(sym)
    clipped_mass = float(-eigvals[eigvals < 0.0].sum())
    if policy == "strict" and clipped_mass > REPAIR_TOLERANCE * max(float(np.trace(sym)), 0.0):
        raise RepairExceededError(
            f"clipped eigenvalue mass {clipped_mass:.3e} exceeds "
            f"{REPAIR_TOLERANCE:g} * trace = {REPAIR_TOLERANCE * np.trace(sym):.3e}"
        )
    clipped = np.maximum(eigvals, 0.0)
    rank_tol = sym.shape[0] * np.finfo(float).eps * max(float(clipped.max(initial=0.0)), 0.0)
    rank = int(np.count_nonzero(clipped > rank_tol))
    lower = eigvecs * np.sqrt(clipped)
    repaired = (eigvecs * clipped) @ eigvecs.T
    repaired = 0.5 * (repaired + repaired.T)
    return PsdFactor(
        lower=lower,
        matrix=repaired,
        rank=rank,
        clipped_mass=clipped_mass,
        _eigvals=clipped,
        _eigvecs=eigvecs,
    )


def sample_mvn(mean: np.ndarray, factor: PsdFactor, count: int, rng: RngStream) -> np.ndarray:
    """Draw ``count`` rows from N(mean, factor.matrix) as ``mean + L z``."""
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 1 or mean.shape[0] != factor.dim:
        raise SizeMismatchError(
            f"mean shape {mean.shape} does not match factor dimension {factor.dim}"
        )
    z = rng.standard_normal((int(count), factor.dim))
    return mean + z @ factor.lower.T


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, accurate to ~1e-16 absolute (erfc-based)."""
    return float(special.ndtr(x))


def std_normal_quantile(u: float) -> float:
    """Inverse standard normal CDF on the open interval (0, 1)."""
    if not 0.0 < u < 1.0:
        raise OutOfRangeError(f"quantile level must lie in (0, 1), got {u}")
    return float(special.ndtri(u))


def chi_square_quantile(df: int, u: float) -> float:
    """Quantile of the chi-square distribution with ``df`` degrees of freedom."""
    if df < 1 or int(df) != df:
        raise OutOfRangeError(f"degrees of freedom must be a positive integer, got {df}")
    if not 0.0 < u < 1.0:
        raise OutOfRangeError(f"quantile level must lie in (0, 1), got {u}")
    return float(2.0 * special.gammaincinv(df / 2.0, u))


def mean_and_cov(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and covariance of the rows, with the 1/n divisor.

    The covariance uses divisor ``n`` (not the ``n - 1`` default of most
    statistics libraries), so a single row yields a zero matrix.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyInputError(f"expected a nonempty 2-d array of rows, got shape {rows.shape}")
    n = rows.shape[0]
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / n
    return mean, 0.5 * (cov + cov.T)


def empirical_quantile(values, k: int) -> float:
    """The k-th smallest value (1-based ascending order statistic)."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInputError("no values to take an order statistic of")
    if not 1 <= k <= arr.size:
        raise OutOfRangeError(f"order statistic index {k} outside 1..{arr.size}")
    return float(np.partition(arr, k - 1)[k - 1])


def ceil_level_index(level: float, n: int) -> int:
    """Order-statistic index ``ceil(level * n)`` clamped to 1..n."""
    return min(max(int(math.ceil(level * n)), 1), n)
