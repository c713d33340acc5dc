"""Discrete algebraic Riccati solver and LQR tracking synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotPositiveDefinite, UnstableGain
from .harness import Controller
from .matnum import as_matrix, spectral_radius
from .plant import LinearSystem, SteadyState


@dataclass(frozen=True)
class LqrSolution:
    """Stabilizing Riccati solution P and feedback gain K for u~ = -K x~."""

    P: np.ndarray
    K: np.ndarray
    iterations: int
    residual: float


def _riccati_map(a, b, ctqc, r, p):
    """One step of P -> A'PA - A'PB (R + B'PB)^-1 B'PA + C'QC, plus the gain."""
    bp = b.T @ p
    gram = r + bp @ b
    gram = (gram + gram.T) / 2.0
    try:
        cf = scipy.linalg.cho_factor(gram, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise NotPositiveDefinite("R + B'PB is not positive definite") from None
    gain = scipy.linalg.cho_solve(cf, bp @ a, check_finite=False)
    nxt = a.T @ p @ a - (bp @ a).T @ gain + ctqc
    return (nxt + nxt.T) / 2.0, gain


def solve_dare(
    sysd: LinearSystem, q, r, tol: float = 1e-10, max_iters: int = 10000
) -> LqrSolution:
    """Fixed-point Riccati iteration for the deviation system.

    Iterates P <- A'PA - A'PB (R + B'PB)^-1 B'PA + C'QC from P0 = C'QC until
    the sup-norm increment drops to `tol`. Raises NoConvergence when the
    budget runs out (e.g. an unstabilizable pair) and NotPositiveDefinite if
    R + B'PB ever loses definiteness.
    """
    q = as_matrix(q, "Q")
    r = as_matrix(r, "R")
    a, b, c = sysd.A, sysd.B, sysd.C
    ctqc = c.T @ q @ c
    p = ctqc.copy()
    for iteration in range(1, max_iters + 1):
        nxt, gain = _riccati_map(a, b, ctqc, r, p)
        delta = float(np.abs(nxt - p).max())
        p = nxt
        if delta <= tol:
            fixed, gain = _riccati_map(a, b, ctqc, r, p)
            residual = float(np.abs(fixed - p).max())
            return LqrSolution(P=p, K=gain, iterations=iteration, residual=residual)
    raise NoConvergence(f"Riccati iteration did not settle within {max_iters} steps")


def lqr_gain(sysd: LinearSystem, p, r) -> np.ndarray:
    """Feedback gain K = (R + B'PB)^-1 B'PA for a given value matrix P."""
    p = as_matrix(p, "P")
    r = as_matrix(r, "R")
    bp = sysd.B.T @ p
    return np.linalg.solve(r + bp @ sysd.B, bp @ sysd.A)


def lqr_tracking_controller(sysd: LinearSystem, k, ss: SteadyState) -> Controller:
    """Tracking controller u = -K (x - x_ss) + u_ss for a stabilizing gain K."""
    k = as_matrix(k, "K")
    rho = spectral_radius(sysd.A - sysd.B @ k)
    if rho >= 1.0:
        raise UnstableGain(f"closed loop A - BK has spectral radius {rho:.6f} >= 1")
    x_ss = ss.x_ss
    u_ss = ss.u_ss

    def act(x):
        return u_ss - k @ (np.asarray(x, dtype=float) - x_ss)

    return Controller("lqr", act)
