"""Dense numerical kernel: linear solves, factorizations, rank, spectral radius.

Thin wrappers over the LAPACK-backed numpy/scipy routines with explicit
failure contracts. Everything operates on plain float64 arrays; `as_matrix`
and `as_vector` are the validation choke points used by the rest of the
package.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, SingularMatrix

# Relative pivot threshold below which an LU factorization is rejected.
PIVOT_RTOL = 1e-12


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting empty or non-finite input."""
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains NaN or infinite entries")
    return m


def as_vector(value, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting empty or non-finite input."""
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise ValueError(f"{name} must not be empty")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} contains NaN or infinite entries")
    return v


def solve_linear(m, b) -> np.ndarray:
    """Solve the square system m @ z = b by partially pivoted LU.

    Raises SingularMatrix when any pivot falls below PIVOT_RTOL relative to
    the matrix scale, so rank-deficient systems fail loudly instead of
    returning garbage.
    """
    m = as_matrix(m)
    b = as_vector(b)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {m.shape}")
    if b.shape[0] != m.shape[0]:
        raise DimensionMismatch("right-hand side length does not match the matrix")
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu))
    scale = max(np.abs(m).max(), pivots.max())
    if scale == 0.0 or pivots.min() <= PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below {PIVOT_RTOL:g} of scale {scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def cholesky(m) -> np.ndarray:
    """Lower-triangular L with L @ L.T = m, for symmetric positive definite m."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {m.shape}")
    scale = max(1.0, np.abs(m).max())
    if np.abs(m - m.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    try:
        return np.linalg.cholesky((m + m.T) / 2.0)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix has a non-positive pivot") from None


def rank(m, tol: float = 1e-9) -> int:
    """Numerical rank from a column-pivoted QR factorization.

    Counts the diagonal entries of R whose magnitude exceeds ``tol`` times
    the largest one.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    m = as_matrix(m)
    r = scipy.linalg.qr(m, mode="r", pivoting=True, check_finite=False)[0]
    d = np.abs(np.diag(r))
    if d.size == 0 or d.max() == 0.0:
        return 0
    return int((d > tol * d.max()).sum())


def spectral_radius(m, max_iters: int = 200, tol: float = 1e-10) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Computed by Hessenberg reduction followed by shifted QR iteration (the
    LAPACK path behind ``numpy.linalg.eigvals``); the backend manages its own
    sweep count, so `max_iters` and `tol` only name the convergence contract.
    Raises NoConvergence if the QR sweeps fail to settle.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {m.shape}")
    try:
        eig = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    return float(np.abs(eig).max())
