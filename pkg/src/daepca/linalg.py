"""Dense linear algebra and column scaling used by every other module.

Thin, validating wrappers around LAPACK via numpy. The wrappers pin the
conventions the rest of the toolkit relies on: eigenvalues sorted in
descending order with a deterministic eigenvector sign, condition-checked
inversion, and population (divide by N) column statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateColumn,
    InvalidShape,
    NumericalFailure,
    SingularMatrix,
)

__all__ = [
    "EigenDecomposition",
    "ColumnStats",
    "ensure_matrix",
    "sym_eig",
    "invert",
    "standardize",
    "apply_stats",
    "undo_stats",
]


def ensure_matrix(x, name: str = "array") -> np.ndarray:
    """Coerce to a finite, C-contiguous float64 2-D array.

    Args:
        x: Array-like input.
        name: Label used in error messages.

    Returns:
        The validated matrix (copied only if coercion requires it).

    Raises:
        InvalidShape: If the input is not 2-D.
        NumericalFailure: If the input contains NaN or Inf.
    """
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidShape(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NumericalFailure(f"{name} contains non-finite values")
    return a


def _ensure_finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericalFailure(f"{what} produced non-finite values")
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (descending) and matching unit eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 1 or self.vectors.ndim != 2:
            raise InvalidShape("values must be 1-D and vectors 2-D")
        if self.vectors.shape[1] != self.values.shape[0]:
            raise InvalidShape("one eigenvector column per eigenvalue required")


@dataclass(frozen=True)
class ColumnStats:
    """Per-column mean and positive scale, as produced by standardize."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.ndim != 1 or self.std.ndim != 1:
            raise InvalidShape("mean and std must be 1-D")
        if self.mean.shape != self.std.shape:
            raise InvalidShape("mean and std must have equal length")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.std))):
            raise NumericalFailure("column stats contain non-finite values")
        if np.any(self.std <= 0.0):
            raise InvalidShape("std entries must be positive")


def sym_eig(a, symmetry_tol: float = 1e-10) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, sorted descending.

    The eigenvector sign is fixed deterministically (largest-magnitude
    entry of each column made positive) so repeated runs on identical
    input yield bitwise-identical output.

    Args:
        a: Square symmetric matrix.
        symmetry_tol: Largest allowed absolute entry of ``a - a.T``.

    Returns:
        EigenDecomposition with ``values`` descending and orthonormal
        ``vectors`` columns.

    Raises:
        InvalidShape: Non-square input, or asymmetry beyond tolerance.
        NumericalFailure: LAPACK failure or non-finite result.
    """
    a = ensure_matrix(a, "a")
    n, m = a.shape
    if n != m:
        raise InvalidShape(f"expected a square matrix, got {a.shape}")
    asym = float(np.max(np.abs(a - a.T))) if n else 0.0
    if asym > symmetry_tol:
        raise InvalidShape(f"matrix asymmetry {asym:.3e} exceeds tol {symmetry_tol:.3e}")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    # deterministic sign: make the largest-|entry| of each column positive
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(n)])
    signs[signs == 0.0] = 1.0
    v *= signs
    _ensure_finite(w, "eigenvalues")
    _ensure_finite(v, "eigenvectors")
    return EigenDecomposition(values=w, vectors=v)


def invert(a, cond_limit: float = 1e12) -> np.ndarray:
    """Inverse of a square matrix with an explicit conditioning gate.

    Args:
        a: Square matrix.
        cond_limit: Reject inputs whose 2-norm condition number reaches
            this value.

    Returns:
        The inverse matrix.

    Raises:
        InvalidShape: Non-square input.
        SingularMatrix: Singular or too ill-conditioned input.
    """
    a = ensure_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise InvalidShape(f"expected a square matrix, got {a.shape}")
    if a.shape[0] == 0:
        raise InvalidShape("cannot invert an empty matrix")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond >= cond_limit:
        raise SingularMatrix(f"condition number {cond:.3e} >= limit {cond_limit:.3e}")
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    return _ensure_finite(inv, "inverse")


def standardize(x) -> tuple[np.ndarray, ColumnStats]:
    """Center and scale columns to zero mean, unit population std.

    Uses the population convention (divide by N) so the result matches
    the fixed batch-normalization layer elsewhere in the toolkit.

    Args:
        x: Data matrix, N rows by m columns, N >= 2.

    Returns:
        (scaled matrix, ColumnStats with the fitted mean and std).

    Raises:
        InvalidShape: Fewer than two rows.
        DegenerateColumn: A column with population std <= 1e-12.
    """
    x = ensure_matrix(x, "x")
    if x.shape[0] < 2:
        raise InvalidShape(f"need at least 2 rows to standardize, got {x.shape[0]}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    bad = np.flatnonzero(std <= 1e-12)
    if bad.size:
        raise DegenerateColumn(int(bad[0]))
    stats = ColumnStats(mean=mean, std=std)
    return (x - mean) / std, stats


def apply_stats(x, stats: ColumnStats) -> np.ndarray:
    """Scale new data with previously fitted column statistics."""
    x = ensure_matrix(x, "x")
    if x.shape[1] != stats.mean.shape[0]:
        raise InvalidShape(
            f"x has {x.shape[1]} columns but stats were fitted on {stats.mean.shape[0]}"
        )
    return (x - stats.mean) / stats.std


def undo_stats(x, stats: ColumnStats) -> np.ndarray:
    """Inverse of apply_stats: map scaled data back to original units."""
    x = ensure_matrix(x, "x")
    if x.shape[1] != stats.mean.shape[0]:
        raise InvalidShape(
            f"x has {x.shape[1]} columns but stats were fitted on {stats.mean.shape[0]}"
        )
    return x * stats.std + stats.mean
