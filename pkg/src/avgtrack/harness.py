"""Closed-loop simulation, controller plumbing, benchmark table, CSV export."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import criteria
from .errors import DimensionMismatch, NonFinite, SolverFailure
from .matnum import as_vector
from .plant import Convention, DEFAULT_CONVENTION, LinearSystem, SteadyState, TrackingProblem, steady_state
from .scalar_dp import closed_form_policy

# Adaptive-horizon rule: double from ADAPTIVE_START until the average-cost
# tail rule triggers, capped at ADAPTIVE_CAP steps.
ADAPTIVE_START = 64
ADAPTIVE_CAP = 10000


@dataclass(frozen=True)
class Controller:
    """Named state-feedback law mapping a state vector to an input vector."""

    name: str
    act: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.act(x)


@dataclass(frozen=True)
class Trajectory:
    """A rollout: T+1 states, T inputs, and the T+1 outputs y = Cx."""

    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class BenchmarkRow:
    """One controller's cost indices plus the tail-convergence flag."""

    method: str
    avg_index: float
    surrogate_index: float
    quadratic_index: float
    converged: bool


def rollout(sysd: LinearSystem, ctrl: Controller, x0, t_steps: int) -> Trajectory:
    """Simulate x+ = A x + B ctrl(x) for t_steps inputs.

    Raises NonFinite as soon as a state or input stops being finite, which is
    how diverging controllers surface.
    """
    if t_steps < 1:
        raise ValueError("t_steps must be at least 1")
    x0 = as_vector(x0)
    if x0.shape != (sysd.n,):
        raise DimensionMismatch("x0 must have the state dimension")
    states = np.empty((t_steps + 1, sysd.n))
    inputs = np.empty((t_steps, sysd.m))
    states[0] = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(t_steps):
            u = np.atleast_1d(np.asarray(ctrl(states[k]), dtype=float))
            if u.shape != (sysd.m,):
                raise DimensionMismatch(f"controller {ctrl.name!r} returned shape {u.shape}")
            if not np.isfinite(u).all():
                raise NonFinite(f"controller {ctrl.name!r} produced a non-finite input at step {k}")
            inputs[k] = u
            states[k + 1] = sysd.A @ states[k] + sysd.B @ u
            if not np.isfinite(states[k + 1]).all():
                raise NonFinite(f"state diverged at step {k + 1} under controller {ctrl.name!r}")
        outputs = states @ sysd.C.T
    return Trajectory(states=states, inputs=inputs, outputs=outputs)


def constant_controller(name: str, u) -> Controller:
    """Controller that ignores the state and always applies u."""
    u = as_vector(u)
    return Controller(name, lambda _x: u.copy())


def exact_scalar_controller(ss: SteadyState) -> Controller:
    """Scalar tracking controller built from the piecewise closed-form policy."""
    if ss.x_ss.shape != (1,) or ss.u_ss.shape != (1,):
        raise DimensionMismatch("the closed-form policy applies to scalar problems only")
    x_ss = float(ss.x_ss[0])
    u_ss = float(ss.u_ss[0])

    def act(x):
        x_dev = float(np.asarray(x, dtype=float).reshape(-1)[0]) - x_ss
        return np.array([closed_form_policy(x_dev) + u_ss])

    return Controller("exact-scalar", act)


def adaptive_rollout(ctx: criteria.StageContext, ctrl: Controller, x0, cap: int = ADAPTIVE_CAP):
    """Grow the horizon until the average-cost tail rule triggers (or cap).

    Returns (trajectory, converged flag).
    """
    t = min(ADAPTIVE_START, cap)
    while True:
        traj = rollout(ctx.problem.system, ctrl, x0, t)
        converged = criteria.tail_converged(criteria.avg_cost_contributions(ctx, traj))
        if converged or t >= cap:
            return traj, converged
        t = min(2 * t, cap)


def benchmark_table(
    prob: TrackingProblem,
    controllers,
    x0,
    t_steps: Optional[int] = None,
    convention: Convention = DEFAULT_CONVENTION,
):
    """One BenchmarkRow per controller, in the order given.

    With t_steps omitted, each controller is simulated with the adaptive
    horizon rule. Diverging controllers (and controllers whose internal
    solver gives up) yield rows with infinite indices and converged=False
    instead of aborting the table.
    """
    if not controllers:
        raise ValueError("need at least one controller")
    ctx = criteria.StageContext(prob, steady_state(prob, convention))
    rows = []
    for ctrl in controllers:
        try:
            if t_steps is None:
                traj, converged = adaptive_rollout(ctx, ctrl, x0)
            else:
                traj = rollout(prob.system, ctrl, x0, t_steps)
                converged = criteria.tail_converged(criteria.avg_cost_contributions(ctx, traj))
            rows.append(
                BenchmarkRow(
                    method=ctrl.name,
                    avg_index=criteria.avg_cost_index(ctx, traj),
                    surrogate_index=criteria.surrogate_index(ctx, traj),
                    quadratic_index=criteria.quadratic_index(ctx, traj),
                    converged=converged,
                )
            )
        except (NonFinite, SolverFailure):
            rows.append(
                BenchmarkRow(
                    method=ctrl.name,
                    avg_index=float("inf"),
                    surrogate_index=float("inf"),
                    quadratic_index=float("inf"),
                    converged=False,
                )
            )
    return rows


def convergence_metrics(traj: Trajectory, ss: SteadyState, tol: float):
    """(settling_step, final_error) for the output error along a trajectory.

    settling_step is the first index k such that the sup-norm output error
    stays at or below tol from k onward, or None if the trajectory never
    settles.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    err = np.abs(traj.outputs - ss.r_ss).max(axis=1)
    final = float(err[-1])
    above = np.nonzero(err > tol)[0]
    if len(above) == 0:
        return 0, final
    k = int(above[-1]) + 1
    if k >= len(err):
        return None, final
    return k, final


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write k, x[...], u[...], y[...] rows; the final row carries no input."""
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    p = traj.outputs.shape[1]
    header = (
        ["k"]
        + [f"x{i}" for i in range(n)]
        + [f"u{i}" for i in range(m)]
        + [f"y{i}" for i in range(p)]
    )
    lines = [",".join(header)]
    for k in range(len(traj.states)):
        row = [str(k)] + [_fmt(v) for v in traj.states[k]]
        if k < len(traj.inputs):
            row += [_fmt(v) for v in traj.inputs[k]]
        else:
            row += [""] * m
        row += [_fmt(v) for v in traj.outputs[k]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def benchmark_to_csv(rows, path) -> None:
    """Write method, the three cost indices, and the convergence flag."""
    lines = ["method,avg_index,surrogate_index,quadratic_index,converged"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row.method,
                    _fmt(row.avg_index),
                    _fmt(row.surrogate_index),
                    _fmt(row.quadratic_index),
                    "true" if row.converged else "false",
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
