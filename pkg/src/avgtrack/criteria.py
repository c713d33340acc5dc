"""Cost functionals: stage costs, signed deviation stage, trajectory indices.

All trajectory indices are finite partial sums over the supplied rollout.
`tail_converged` reports whether the final quarter of the per-step
contributions is negligible; the harness uses it to flag truncated sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .matnum import as_vector
from .plant import Convention, SteadyState, TrackingProblem

# A partial sum counts as converged when its last quarter contributes less
# than this fraction of the total.
TAIL_RTOL = 1e-6


@dataclass(frozen=True)
class StageContext:
    """A tracking problem together with its steady-state data."""

    problem: TrackingProblem
    ss: SteadyState

    def __post_init__(self):
        sysd = self.problem.system
        if self.ss.x_ss.shape != (sysd.n,) or self.ss.u_ss.shape != (sysd.m,):
            raise DimensionMismatch("steady state does not match the problem dimensions")
        if np.abs(sysd.C @ self.ss.x_ss - self.problem.r_ss).max() > 1e-6:
            raise ValueError("steady state does not reproduce the problem reference")


def stage_cost(ctx: StageContext, x, u) -> float:
    """Nonnegative stage cost of a physical state/input pair.

    Under PLAIN this is the output-error form e'Qe + u'Ru with e = Cx - r_ss;
    under EXACT it is the output form (Cx)'Q(Cx) + u'Ru, whose deviation
    expansion is exact. Both evaluate to c_ss at the steady pair.
    """
    prob = ctx.problem
    x = as_vector(x)
    u = as_vector(u)
    e = prob.system.C @ x
    if ctx.ss.convention is not Convention.EXACT:
        e = e - prob.r_ss
    return float(e @ prob.Q @ e + u @ prob.R @ u)


def stage_deviation(ctx: StageContext, x_dev, u_dev) -> float:
    """Signed deviation stage x~'C'QC x~ + u~'R u~ + s'x~ + r_lin'u~."""
    xd = as_vector(x_dev)
    ud = as_vector(u_dev)
    ss = ctx.ss
    return float(
        xd @ ctx.problem.ctqc @ xd + ud @ ctx.problem.R @ ud + ss.s @ xd + ss.r_lin @ ud
    )


def surrogate_stage(ctx: StageContext, x_dev, u_dev) -> float:
    """Upper-bound stage: the quadratic part plus |s'x~ + r_lin'u~|."""
    xd = as_vector(x_dev)
    ud = as_vector(u_dev)
    ss = ctx.ss
    quad = float(xd @ ctx.problem.ctqc @ xd + ud @ ctx.problem.R @ ud)
    return quad + abs(float(ss.s @ xd + ss.r_lin @ ud))


def _stage_arrays(ctx, traj):
    """States (first T), inputs, and their deviations as stacked arrays."""
    us = np.atleast_2d(np.asarray(traj.inputs, dtype=float))
    if us.shape[0] == 0:
        raise ValueError("trajectory must contain at least one input")
    xs = np.atleast_2d(np.asarray(traj.states, dtype=float))[: us.shape[0]]
    return xs, us, xs - ctx.ss.x_ss, us - ctx.ss.u_ss


def avg_cost_contributions(ctx: StageContext, traj) -> np.ndarray:
    """Per-step |stage_cost - c_ss| along a rollout."""
    prob, ss = ctx.problem, ctx.ss
    xs, us, _, _ = _stage_arrays(ctx, traj)
    e = xs @ prob.system.C.T
    if ss.convention is not Convention.EXACT:
        e = e - prob.r_ss
    quad = np.einsum("ki,ij,kj->k", e, prob.Q, e) + np.einsum(
        "ki,ij,kj->k", us, prob.R, us
    )
    return np.abs(quad - ss.c_ss)


def avg_cost_index(ctx: StageContext, traj) -> float:
    """Partial sum of |stage_cost - c_ss| over the trajectory."""
    return float(avg_cost_contributions(ctx, traj).sum())


def surrogate_contributions(ctx: StageContext, traj) -> np.ndarray:
    """Per-step surrogate stage (quadratic plus absolute linear term)."""
    _, _, xd, ud = _stage_arrays(ctx, traj)
    prob, ss = ctx.problem, ctx.ss
    quad = np.einsum("ki,ij,kj->k", xd, prob.ctqc, xd) + np.einsum(
        "ki,ij,kj->k", ud, prob.R, ud
    )
    return quad + np.abs(xd @ ss.s + ud @ ss.r_lin)


def surrogate_index(ctx: StageContext, traj) -> float:
    """Partial sum of the surrogate stage over the trajectory."""
    return float(surrogate_contributions(ctx, traj).sum())


def quadratic_contributions(ctx: StageContext, traj) -> np.ndarray:
    """Per-step quadratic deviation cost x~'C'QC x~ + u~'R u~."""
    _, _, xd, ud = _stage_arrays(ctx, traj)
    prob = ctx.problem
    return np.einsum("ki,ij,kj->k", xd, prob.ctqc, xd) + np.einsum(
        "ki,ij,kj->k", ud, prob.R, ud
    )


def quadratic_index(ctx: StageContext, traj) -> float:
    """Partial sum of the quadratic deviation cost over the trajectory."""
    return float(quadratic_contributions(ctx, traj).sum())


def tail_converged(contributions) -> bool:
    """True when the last quarter of a contribution series is negligible."""
    c = np.asarray(contributions, dtype=float)
    total = c.sum()
    if total <= 0.0:
        return True
    return float(c[3 * len(c) // 4 :].sum()) < TAIL_RTOL * total
