"""Command-line front end: load problems from JSON, run analyses and benchmarks.

Exit codes: 0 success, 1 usage or parse error, 2 assumption failure,
3 diverging closed loop.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .criteria import (
    StageContext,
    avg_cost_contributions,
    avg_cost_index,
    quadratic_index,
    surrogate_index,
    tail_converged,
)
from .errors import (
    AssumptionTwoViolated,
    DimensionMismatch,
    NoConvergence,
    NonFinite,
    NotPositiveDefinite,
    SolverFailure,
)
from .harness import (
    adaptive_rollout,
    benchmark_table,
    benchmark_to_csv,
    convergence_metrics,
    exact_scalar_controller,
    rollout,
    trajectory_to_csv,
)
from .matnum import spectral_radius
from .mpc import MpcConfig, mpc_controller
from .plant import (
    Convention,
    LinearSystem,
    TrackingProblem,
    check_controllable,
    check_observable,
    steady_state,
)
from .riccati import lqr_tracking_controller, solve_dare
from .scalar_dp import (
    Grid1D,
    closed_form_policy,
    closed_form_value,
    value_iteration,
    value_table_to_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSUMPTION = 2
EXIT_DIVERGED = 3

# Reference cost values printed next to the computed benchmark for the
# bundled scalar example: (avg_index, surrogate_index, quadratic_index).
REFERENCE_INDICES = {
    "lqr": (420.3626, 420.3626, 319.5642),
    "exact-scalar": (420.2428, 420.2428, 392.9962),
    "mpc": (611.2143, 659.0715, 659.0715),
}


class _CliError(Exception):
    """Usage or input-file problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _fmt(v) -> str:
    return format(float(v), ".10g")


def _fmt_vec(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in np.atleast_1d(v)) + "]"


def _fmt_mat(m) -> str:
    m = np.atleast_2d(m)
    return "[" + "; ".join(", ".join(_fmt(x) for x in row) for row in m) + "]"


def load_problem(path):
    """Parse a JSON problem file into (TrackingProblem, convention, MpcConfig, x0)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _CliError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(raw, dict):
        raise _CliError(f"{path}: top level must be a JSON object")
    for key in ("A", "B", "C", "Q", "R", "r_ss"):
        if key not in raw:
            raise _CliError(f'{path}: missing key "{key}"')
    try:
        system = LinearSystem(raw["A"], raw["B"], raw["C"])
        prob = TrackingProblem(system, raw["Q"], raw["R"], raw["r_ss"])
    except (DimensionMismatch, NotPositiveDefinite, ValueError, TypeError) as exc:
        raise _CliError(f"{path}: {exc}") from None

    try:
        convention = Convention(raw.get("convention", Convention.PLAIN.value))
    except ValueError:
        allowed = ", ".join(repr(c.value) for c in Convention)
        raise _CliError(f'{path}: key "convention" must be one of {allowed}') from None

    mpc_raw = raw.get("mpc", {})
    if not isinstance(mpc_raw, dict):
        raise _CliError(f'{path}: key "mpc" must be an object')
    try:
        config = MpcConfig(
            horizon=int(mpc_raw.get("N", MpcConfig.horizon)),
            rollout=int(mpc_raw.get("L", MpcConfig.rollout)),
            qp_tol=float(mpc_raw.get("qp_tol", MpcConfig.qp_tol)),
            convention=convention,
        )
    except (TypeError, ValueError) as exc:
        raise _CliError(f'{path}: key "mpc": {exc}') from None

    x0 = None
    if "x0" in raw:
        x0 = np.atleast_1d(np.asarray(raw["x0"], dtype=float))
        if x0.shape != (system.n,):
            raise _CliError(f'{path}: key "x0" must have the state dimension {system.n}')
    return prob, convention, config, x0


def _resolve_x0(args, prob, file_x0):
    if args.x0 is not None:
        try:
            x0 = np.array([float(v) for v in args.x0.split(",")])
        except ValueError:
            raise _CliError("--x0 must be a comma-separated list of numbers") from None
        if x0.shape != (prob.system.n,):
            raise _CliError(f"--x0 must have the state dimension {prob.system.n}")
        return x0
    if file_x0 is not None:
        return file_x0
    raise _CliError('no initial state: pass --x0 or add "x0" to the problem file')


def _steady_context(prob, convention):
    try:
        ss = steady_state(prob, convention)
    except DimensionMismatch as exc:
        raise _CliError(str(exc)) from None
    return ss, StageContext(prob, ss)


def _is_bundled_scalar(prob) -> bool:
    sysd = prob.system
    if (sysd.n, sysd.m, sysd.p) != (1, 1, 1):
        return False
    return (
        float(sysd.A[0, 0]) == 2.0
        and float(sysd.B[0, 0]) == 1.0
        and float(sysd.C[0, 0]) == 1.0
        and float(prob.Q[0, 0]) == 1.0
        and float(prob.R[0, 0]) == 1.0
        and float(prob.r_ss[0]) == 1.0
    )


def _make_controller(kind, prob, ss, ctx, config):
    if kind == "exact-scalar":
        if (prob.system.n, prob.system.m, prob.system.p) != (1, 1, 1):
            raise _CliError("exact-scalar requires a scalar problem (n = m = p = 1)")
        return exact_scalar_controller(ss)
    solution = solve_dare(prob.system, prob.Q, prob.R)
    if kind == "lqr":
        return lqr_tracking_controller(prob.system, solution.K, ss)
    return mpc_controller(ctx, solution.K, config)


def cmd_analyze(args) -> int:
    prob, convention, _, _ = load_problem(args.file)
    controllable = check_controllable(prob.system)
    observable = check_observable(prob.system, prob.Q)
    print(f"controllable: {'yes' if controllable else 'no'}")
    print(f"observable: {'yes' if observable else 'no'}")
    if prob.system.p != prob.system.m:
        raise _CliError(
            f"steady-state block matrix needs p == m (p={prob.system.p}, m={prob.system.m})"
        )
    invertible = True
    try:
        ss = steady_state(prob, convention)
    except AssumptionTwoViolated:
        invertible = False
        ss = None
    print(f"steady-state block matrix invertible: {'yes' if invertible else 'no'}")
    if ss is not None:
        print(f"x_ss = {_fmt_vec(ss.x_ss)}")
        print(f"u_ss = {_fmt_vec(ss.u_ss)}")
        print(f"steady stage cost = {_fmt(ss.c_ss)}")
    try:
        solution = solve_dare(prob.system, prob.Q, prob.R)
        rho = spectral_radius(prob.system.A - prob.system.B @ solution.K)
        print(f"P = {_fmt_mat(solution.P)}")
        print(f"K = {_fmt_mat(solution.K)}")
        print(f"closed-loop spectral radius = {_fmt(rho)}")
    except (NoConvergence, NotPositiveDefinite) as exc:
        print(f"riccati solve failed: {exc}")
    return EXIT_OK if (controllable and observable and invertible) else EXIT_ASSUMPTION


def cmd_simulate(args) -> int:
    prob, convention, config, file_x0 = load_problem(args.file)
    x0 = _resolve_x0(args, prob, file_x0)
    try:
        ss, ctx = _steady_context(prob, convention)
        ctrl = _make_controller(args.controller, prob, ss, ctx, config)
    except AssumptionTwoViolated as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    try:
        if args.steps is not None:
            if args.steps < 1:
                raise _CliError("--steps must be at least 1")
            traj = rollout(prob.system, ctrl, x0, args.steps)
            converged = tail_converged(avg_cost_contributions(ctx, traj))
        else:
            traj, converged = adaptive_rollout(ctx, ctrl, x0)
    except (NonFinite, SolverFailure) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    settle, final_err = convergence_metrics(traj, ss, args.settle_tol)
    print(f"steps simulated: {len(traj)}")
    print(f"avg_index = {_fmt(avg_cost_index(ctx, traj))}")
    print(f"surrogate_index = {_fmt(surrogate_index(ctx, traj))}")
    print(f"quadratic_index = {_fmt(quadratic_index(ctx, traj))}")
    print(f"tail converged: {'yes' if converged else 'no'}")
    print(f"settling step (tol {_fmt(args.settle_tol)}): "
          f"{settle if settle is not None else 'never'}")
    print(f"final output error = {_fmt(final_err)}")
    if args.out:
        trajectory_to_csv(traj, args.out)
        print(f"trajectory written to {args.out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    prob, convention, config, file_x0 = load_problem(args.file)
    x0 = _resolve_x0(args, prob, file_x0)
    scalar = (prob.system.n, prob.system.m, prob.system.p) == (1, 1, 1)
    try:
        ss, ctx = _steady_context(prob, convention)
        controllers = [_make_controller("lqr", prob, ss, ctx, config)]
        if scalar:
            controllers.append(_make_controller("exact-scalar", prob, ss, ctx, config))
        else:
            print("exact-scalar controller skipped: problem is not scalar")
        controllers.append(_make_controller("mpc", prob, ss, ctx, config))
    except AssumptionTwoViolated as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NoConvergence as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    rows = benchmark_table(prob, controllers, x0, t_steps=args.steps, convention=convention)
    with_reference = _is_bundled_scalar(prob)
    header = f"{'method':<14}{'avg_index':>16}{'surrogate_index':>18}{'quadratic_index':>18}{'converged':>11}"
    if with_reference:
        header += f"{'avg_ref':>12}{'surrogate_ref':>15}{'quadratic_ref':>15}"
    print(header)
    for row in rows:
        line = (
            f"{row.method:<14}{_fmt(row.avg_index):>16}{_fmt(row.surrogate_index):>18}"
            f"{_fmt(row.quadratic_index):>18}{'yes' if row.converged else 'no':>11}"
        )
        if with_reference:
            ref = REFERENCE_INDICES.get(row.method)
            if ref is not None:
                line += f"{ref[0]:>12}{ref[1]:>15}{ref[2]:>15}"
        print(line)
    if args.out:
        benchmark_to_csv(rows, args.out)
        print(f"benchmark written to {args.out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    prob, convention, _, _ = load_problem(args.file)
    if (prob.system.n, prob.system.m, prob.system.p) != (1, 1, 1):
        raise _CliError("the oracle requires a scalar problem (n = m = p = 1)")
    try:
        grid = Grid1D(args.grid_min, args.grid_max, args.nodes)
    except ValueError as exc:
        raise _CliError(str(exc)) from None
    if args.nodes < 1001:
        print("warning: coarse grid (fewer than 1001 nodes); expect larger errors")
    try:
        ss, ctx = _steady_context(prob, convention)
    except AssumptionTwoViolated as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    try:
        table = value_iteration(ctx, grid)
    except NoConvergence as exc:
        print(f"value iteration failed: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    print(f"sweeps: {table.sweeps}")
    print(f"final sweep change: {_fmt(table.residual)}")
    if _is_bundled_scalar(prob):
        nodes = table.grid.nodes
        inner = np.abs(nodes) <= 0.45
        value_gap = float(np.abs(table.values - closed_form_value(nodes))[inner].max())
        policy_gap = float(np.abs(table.policy - closed_form_policy(nodes))[inner].max())
        print(f"max |V - closed form| over |x~| <= 0.45: {_fmt(value_gap)}")
        print(f"max |policy - closed form| over |x~| <= 0.45: {_fmt(policy_gap)}")
    if args.out:
        value_table_to_csv(table, args.out)
        print(f"value table written to {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="avgtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="structural checks, steady state, Riccati design")
    p.add_argument("file", help="JSON problem file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="closed-loop rollout with one controller")
    p.add_argument("file", help="JSON problem file")
    p.add_argument("--controller", required=True, choices=["lqr", "mpc", "exact-scalar"])
    p.add_argument("--x0", help="comma-separated initial state (overrides the file)")
    p.add_argument("--steps", type=int, help="fixed horizon instead of the adaptive rule")
    p.add_argument("--settle-tol", type=float, default=1e-3)
    p.add_argument("--out", help="write the trajectory CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="compare lqr, exact-scalar, and mpc")
    p.add_argument("file", help="JSON problem file")
    p.add_argument("--x0", help="comma-separated initial state (overrides the file)")
    p.add_argument("--steps", type=int, help="fixed horizon instead of the adaptive rule")
    p.add_argument("--out", help="write the benchmark CSV here")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle", help="1-D value-iteration table and closed-form gap")
    p.add_argument("file", help="JSON problem file")
    p.add_argument("--grid-min", type=float, default=-2.0)
    p.add_argument("--grid-max", type=float, default=2.0)
    p.add_argument("--nodes", type=int, default=4001)
    p.add_argument("--out", help="write the value-table CSV here")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
