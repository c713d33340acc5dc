"""Plant model, structural checks, steady-state targets, deviation coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import AssumptionTwoViolated, DimensionMismatch, SingularMatrix
from .matnum import as_matrix, as_vector, cholesky, rank, solve_linear


class Convention(Enum):
    """How the linear deviation-cost terms and the steady stage cost are formed.

    PLAIN keeps single-weight linear terms, s = C'QC x_ss and r_lin = R u_ss,
    paired with the output-error stage cost e'Qe + u'Ru (e = Cx - r_ss). This
    is the form under which the bundled scalar problem's surrogate stage reads
    x~^2 + u~^2 + |x~ - u~|.

    EXACT doubles both linear weights and pairs them with the raw output stage
    cost (Cx)'Q(Cx) + u'Ru, which makes the signed deviation stage identically
    equal to stage_cost - c_ss.
    """

    PLAIN = "paper"
    EXACT = "exact"


DEFAULT_CONVENTION = Convention.PLAIN


@dataclass(frozen=True)
class LinearSystem:
    """Discrete-time plant x+ = A x + B u, y = C x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A, "A"))
        object.__setattr__(self, "B", as_matrix(self.B, "B"))
        object.__setattr__(self, "C", as_matrix(self.C, "C"))
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise DimensionMismatch("A must be square")
        if self.B.shape[0] != n:
            raise DimensionMismatch("B must have as many rows as A")
        if self.C.shape[1] != n:
            raise DimensionMismatch("C must have as many columns as A")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class TrackingProblem:
    """Plant plus tracking data: output weight Q, input weight R, reference r_ss."""

    system: LinearSystem
    Q: np.ndarray
    R: np.ndarray
    r_ss: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", as_matrix(self.Q, "Q"))
        object.__setattr__(self, "R", as_matrix(self.R, "R"))
        object.__setattr__(self, "r_ss", as_vector(self.r_ss, "r_ss"))
        sysd = self.system
        if self.Q.shape != (sysd.p, sysd.p):
            raise DimensionMismatch("Q must be p x p")
        if self.R.shape != (sysd.m, sysd.m):
            raise DimensionMismatch("R must be m x m")
        if self.r_ss.shape != (sysd.p,):
            raise DimensionMismatch("r_ss must have dimension p")
        cholesky(self.Q)
        cholesky(self.R)

    @property
    def ctqc(self) -> np.ndarray:
        """State-space output weight C'QC."""
        c = self.system.C
        return c.T @ self.Q @ c


@dataclass(frozen=True)
class SteadyState:
    """Steady pair (x_ss, u_ss) plus the derived deviation-cost data.

    `s` and `r_lin` weight the linear deviation terms, `c_ss` is the stage
    cost of holding the steady pair, both under the stored convention. The
    reference vector is kept for output-error metrics.
    """

    x_ss: np.ndarray
    u_ss: np.ndarray
    s: np.ndarray
    r_lin: np.ndarray
    c_ss: float
    convention: Convention
    r_ss: np.ndarray


def check_controllable(sysd: LinearSystem) -> bool:
    """Kalman rank test on [B, AB, ..., A^(n-1) B]."""
    blocks = []
    blk = sysd.B
    for _ in range(sysd.n):
        blocks.append(blk)
        blk = sysd.A @ blk
    return rank(np.hstack(blocks)) == sysd.n


def check_observable(sysd: LinearSystem, q) -> bool:
    """Observability of (A, L'C) where L is the Cholesky factor of the output weight."""
    l_q = cholesky(q)
    row = l_q.T @ sysd.C
    blocks = []
    for _ in range(sysd.n):
        blocks.append(row)
        row = row @ sysd.A
    return rank(np.vstack(blocks)) == sysd.n


def steady_state(
    prob: TrackingProblem, convention: Convention = DEFAULT_CONVENTION
) -> SteadyState:
    """Solve the steady-state block system and derive the deviation-cost terms.

    The block matrix [[A - I, B], [C, 0]] is square only when p == m; a
    singular block raises AssumptionTwoViolated.
    """
    sysd = prob.system
    n, m, p = sysd.n, sysd.m, sysd.p
    if p != m:
        raise DimensionMismatch(
            f"steady-state block matrix is square only when p == m (p={p}, m={m})"
        )
    block = np.zeros((n + p, n + m))
    block[:n, :n] = sysd.A - np.eye(n)
    block[:n, n:] = sysd.B
    block[n:, :n] = sysd.C
    rhs = np.concatenate([np.zeros(n), prob.r_ss])
    try:
        sol = solve_linear(block, rhs)
    except SingularMatrix as exc:
        raise AssumptionTwoViolated(str(exc)) from None
    x_ss, u_ss = sol[:n], sol[n:]
    ctqc = prob.ctqc
    if convention is Convention.EXACT:
        s = 2.0 * (ctqc @ x_ss)
        r_lin = 2.0 * (prob.R @ u_ss)
        c_ss = float(x_ss @ ctqc @ x_ss + u_ss @ prob.R @ u_ss)
    else:
        s = ctqc @ x_ss
        r_lin = prob.R @ u_ss
        e = sysd.C @ x_ss - prob.r_ss
        c_ss = float(e @ prob.Q @ e + u_ss @ prob.R @ u_ss)
    return SteadyState(
        x_ss=x_ss,
        u_ss=u_ss,
        s=s,
        r_lin=r_lin,
        c_ss=c_ss,
        convention=convention,
        r_ss=prob.r_ss.copy(),
    )


def to_deviation(x, u, ss: SteadyState):
    """Shift a state/input pair into deviation coordinates."""
    return as_vector(x) - ss.x_ss, as_vector(u) - ss.u_ss


def from_deviation(u_dev, ss: SteadyState) -> np.ndarray:
    """Recompose the physical input from a deviation input."""
    return as_vector(u_dev) + ss.u_ss
