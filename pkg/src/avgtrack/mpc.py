"""Receding-horizon controller for the absolute-value surrogate cost.

The per-stage cost x~'C'QC x~ + u~'R u~ + |s'x~ + r_lin'u~| is made quadratic
by one slack variable per stage (tau_k bounded below by both signs of the
linear term), the terminal tail is realized as extra stages driven by a fixed
stabilizing gain, and the resulting convex QP is solved by an over-relaxed
operator-splitting iteration with an active-set polish step.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import SolverFailure
from .harness import Controller
from .matnum import as_matrix, as_vector
from .plant import Convention, DEFAULT_CONVENTION

# Operator-splitting constants (OSQP-style defaults).
_SIGMA = 1e-6
_ALPHA = 1.6
_RHO = 0.1
_RHO_EQ_SCALE = 1e3
_CHECK_EVERY = 25
_ADAPT_EVERY = 100
_POLISH_DELTA = 1e-9


@dataclass(frozen=True)
class MpcConfig:
    """Horizon and solver settings for the receding-horizon controller.

    `horizon` is the number of free-input stages, `rollout` the number of
    terminal stages driven by the fixed gain.
    """

    horizon: int = 10
    rollout: int = 30
    qp_tol: float = 1e-8
    qp_max_iters: int = 50000
    convention: Convention = DEFAULT_CONVENTION

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.rollout < 0:
            raise ValueError("rollout must be nonnegative")
        if self.qp_tol <= 0.0 or self.qp_max_iters < 1:
            raise ValueError("solver settings must be positive")


class QpStatus(Enum):
    SOLVED = "solved"
    MAX_ITERS = "max-iters"


@dataclass(frozen=True)
class QpProblem:
    """min 0.5 z'Hz + g'z + const  subject to  E z = f  and  G z <= h_ineq."""

    H: np.ndarray
    g: np.ndarray
    E: np.ndarray
    f: np.ndarray
    G: np.ndarray
    h_ineq: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float).reshape(-1))
        nz = len(self.g)
        object.__setattr__(self, "E", np.asarray(self.E, dtype=float).reshape(-1, nz))
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).reshape(-1))
        object.__setattr__(self, "G", np.asarray(self.G, dtype=float).reshape(-1, nz))
        object.__setattr__(self, "h_ineq", np.asarray(self.h_ineq, dtype=float).reshape(-1))
        if self.H.shape != (nz, nz):
            raise ValueError("H must be square with the decision dimension")
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-8 * max(1.0, np.abs(self.H).max(initial=0.0)):
            raise ValueError("H must be symmetric")
        if len(self.f) != self.E.shape[0] or len(self.h_ineq) != self.G.shape[0]:
            raise ValueError("constraint right-hand sides do not match their matrices")

    @property
    def n_vars(self) -> int:
        return len(self.g)


@dataclass(frozen=True)
class QpSolution:
    """Primal point, objective value, residuals, multipliers, and status."""

    z: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    status: QpStatus
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    iterations: int


def build_qp(ctx, k_gain, x0_dev, config: MpcConfig) -> QpProblem:
    """Assemble the slack-reformulated horizon program for one solve.

    Decision vector: [u~_0 .. u~_{N-1}, x~_1 .. x~_{N+L}, tau_0 .. tau_{N+L-1}]
    with N = config.horizon and L = config.rollout. The current deviation
    state enters as a constant: its quadratic cost goes to `const` and its
    linear-term share moves to the constraint right-hand sides. Rollout
    stages substitute u~ = -K x~, so only states and slacks remain there.
    """
    prob, ss = ctx.problem, ctx.ss
    sysd = prob.system
    n, m = sysd.n, sysd.m
    big_n, big_l = config.horizon, config.rollout
    k_gain = as_matrix(k_gain, "K")
    x0 = as_vector(x0_dev, "x0_dev")
    ctqc = prob.ctqc
    a_cl = sysd.A - sysd.B @ k_gain
    ctqc_roll = ctqc + k_gain.T @ prob.R @ k_gain
    s_roll = ss.s - k_gain.T @ ss.r_lin

    total = big_n + big_l
    nu = big_n * m
    nx = total * n
    nz = nu + nx + total

    def iu(k):
        return slice(k * m, (k + 1) * m)

    def ix(j):
        # state x~ at stage j+1, j in [0, total)
        return slice(nu + j * n, nu + (j + 1) * n)

    hess = np.zeros((nz, nz))
    g = np.zeros(nz)
    for k in range(big_n):
        hess[iu(k), iu(k)] = 2.0 * prob.R
    for k in range(1, big_n):
        hess[ix(k - 1), ix(k - 1)] = 2.0 * ctqc
    for k in range(big_n, total):
        hess[ix(k - 1), ix(k - 1)] = 2.0 * ctqc_roll
    g[nu + nx :] = 1.0
    const = float(x0 @ ctqc @ x0)

    eq = np.zeros((total * n, nz))
    f = np.zeros(total * n)
    for k in range(total):
        rows = slice(k * n, (k + 1) * n)
        eq[rows, ix(k)] = np.eye(n)
        if k == 0:
            eq[rows, iu(0)] = -sysd.B
            f[rows] = sysd.A @ x0
        elif k < big_n:
            eq[rows, ix(k - 1)] = -sysd.A
            eq[rows, iu(k)] = -sysd.B
        else:
            eq[rows, ix(k - 1)] = -a_cl

    ineq = np.zeros((2 * total, nz))
    h_ineq = np.zeros(2 * total)
    for k in range(total):
        lin = np.zeros(nz)
        offset = 0.0
        if k == 0:
            lin[iu(0)] = ss.r_lin
            offset = float(ss.s @ x0)
        elif k < big_n:
            lin[ix(k - 1)] = ss.s
            lin[iu(k)] = ss.r_lin
        else:
            lin[ix(k - 1)] = s_roll
        tau_col = nu + nx + k
        ineq[2 * k] = lin
        ineq[2 * k, tau_col] -= 1.0
        h_ineq[2 * k] = -offset
        ineq[2 * k + 1] = -lin
        ineq[2 * k + 1, tau_col] -= 1.0
        h_ineq[2 * k + 1] = offset
    return QpProblem(H=hess, g=g, E=eq, f=f, G=ineq, h_ineq=h_ineq, const=const)


def split_decision(z, n: int, m: int, config: MpcConfig):
    """(inputs, states, slacks) blocks of a stacked decision vector."""
    total = config.horizon + config.rollout
    nu = config.horizon * m
    nx = total * n
    z = np.asarray(z, dtype=float)
    return (
        z[:nu].reshape(config.horizon, m),
        z[nu : nu + nx].reshape(total, n),
        z[nu + nx :].copy(),
    )


def _residuals(qp, z, lam, mu):
    """Feasibility and stationarity residuals at a candidate point."""
    rp = 0.0
    if len(qp.f):
        rp = float(np.abs(qp.E @ z - qp.f).max())
    if len(qp.h_ineq):
        rp = max(rp, float(np.maximum(qp.G @ z - qp.h_ineq, 0.0).max()))
    grad = qp.H @ z + qp.g
    if len(qp.f):
        grad = grad + qp.E.T @ lam
    if len(qp.h_ineq):
        grad = grad + qp.G.T @ mu
    return rp, float(np.abs(grad).max(initial=0.0))


def _polish(qp, z, mu, slack_thr):
    """Solve the KKT system on the detected active set.

    Equality rows are always active; inequality rows are taken active when
    their multiplier is clearly positive or their slack is below `slack_thr`.
    Returns (z, lam, mu) or None when the regularized solve fails.
    """
    nz = qp.n_vars
    ne = len(qp.f)
    ni = len(qp.h_ineq)
    if ni:
        slack = qp.h_ineq - qp.G @ z
        active = (mu > 1e-9 * max(1.0, float(np.abs(mu).max(initial=0.0)))) | (
            slack < slack_thr
        )
        a_act = np.vstack([qp.E, qp.G[active]])
        b_act = np.concatenate([qp.f, qp.h_ineq[active]])
    else:
        active = np.zeros(0, dtype=bool)
        a_act = qp.E
        b_act = qp.f
    na = len(b_act)
    kkt = np.zeros((nz + na, nz + na))
    kkt[:nz, :nz] = qp.H + _POLISH_DELTA * np.eye(nz)
    kkt[:nz, nz:] = a_act.T
    kkt[nz:, :nz] = a_act
    kkt[nz:, nz:] = -_POLISH_DELTA * np.eye(na)
    rhs = np.concatenate([-qp.g, b_act])
    try:
        lu = scipy.linalg.lu_factor(kkt, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        return None
    sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    # Iterative refinement against the unregularized KKT system.
    kkt0 = kkt.copy()
    kkt0[:nz, :nz] = qp.H
    kkt0[nz:, nz:] = 0.0
    for _ in range(3):
        sol = sol + scipy.linalg.lu_solve(lu, rhs - kkt0 @ sol, check_finite=False)
    if not np.isfinite(sol).all():
        return None
    z_p = sol[:nz]
    lam_p = sol[nz : nz + ne]
    mu_p = np.zeros(ni)
    if ni:
        mu_p[active] = np.maximum(sol[nz + ne :], 0.0)
    return z_p, lam_p, mu_p


def solve_qp(qp: QpProblem, tol: float = 1e-8, max_iters: int = 50000) -> QpSolution:
    """Solve the QP by over-relaxed splitting on the stacked constraints.

    Equalities and inequalities are stacked as l <= Mz <= u. Each iteration
    solves one quasi-definite KKT system (factored once) and projects onto
    the constraint box with over-relaxation. Once the residuals are small the
    iterate is polished on its active set; the result is returned as SOLVED
    when both residuals reach `tol`, otherwise iteration continues until
    `max_iters` and the best candidate is returned as MAX_ITERS.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    nz = qp.n_vars
    ne = len(qp.f)
    ni = len(qp.h_ineq)
    nm = ne + ni

    def attempt_polish(z, lam, mu, rp, rd):
        """Best (z, lam, mu, rp, rd) over a ladder of active-set thresholds."""
        best = (z, lam, mu, rp, rd)
        for scale in (10.0, 100.0, 1000.0):
            thr = max(scale * (rp + tol), scale * 1e-9)
            polished = _polish(qp, z, mu, thr)
            if polished is None:
                continue
            rp_p, rd_p = _residuals(qp, *polished)
            if max(rp_p, rd_p) < max(best[3], best[4]):
                best = (*polished, rp_p, rd_p)
            if max(rp_p, rd_p) <= tol:
                break
        return best

    def finish(z, lam, mu, rp, rd, iterations):
        status = QpStatus.SOLVED if max(rp, rd) <= tol else QpStatus.MAX_ITERS
        objective = float(0.5 * z @ qp.H @ z + qp.g @ z + qp.const)
        return QpSolution(
            z=z,
            objective=objective,
            primal_residual=rp,
            dual_residual=rd,
            status=status,
            eq_multipliers=lam,
            ineq_multipliers=mu,
            iterations=iterations,
        )

    if nm == 0:
        z = np.linalg.lstsq(qp.H, -qp.g, rcond=None)[0]
        lam = np.zeros(0)
        rp, rd = _residuals(qp, z, lam, lam)
        return finish(z, lam, lam.copy(), rp, rd, 0)

    stacked = np.vstack([qp.E, qp.G])
    lo = np.concatenate([qp.f, np.full(ni, -np.inf)])
    hi = np.concatenate([qp.f, qp.h_ineq])

    rho_base = _RHO
    kkt = np.zeros((nz + nm, nz + nm))
    kkt[:nz, :nz] = qp.H + _SIGMA * np.eye(nz)
    kkt[:nz, nz:] = stacked.T
    kkt[nz:, :nz] = stacked

    def factor(base):
        rho = np.full(nm, base)
        rho[:ne] *= _RHO_EQ_SCALE
        rho_inv = 1.0 / rho
        kkt[nz:, nz:] = -np.diag(rho_inv)
        return rho, rho_inv, scipy.linalg.lu_factor(kkt, check_finite=False)

    rho, rho_inv, lu = factor(rho_base)
    z = np.zeros(nz)
    zeta = np.zeros(nm)
    y = np.zeros(nm)
    polish_gate = max(1e3 * tol, 1e-5)
    for iteration in range(1, max_iters + 1):
        rhs = np.concatenate([_SIGMA * z - qp.g, zeta - rho_inv * y])
        sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
        z_t = sol[:nz]
        zeta_t = zeta + rho_inv * (sol[nz:] - y)
        z = _ALPHA * z_t + (1.0 - _ALPHA) * z
        w = _ALPHA * zeta_t + (1.0 - _ALPHA) * zeta
        zeta = np.clip(w + rho_inv * y, lo, hi)
        y = y + rho * (w - zeta)
        if iteration % _CHECK_EVERY == 0 or iteration == max_iters:
            lam = y[:ne]
            mu = np.maximum(y[ne:], 0.0)
            rp, rd = _residuals(qp, z, lam, mu)
            if max(rp, rd) <= polish_gate or iteration == max_iters:
                z_b, lam_b, mu_b, rp_b, rd_b = attempt_polish(z, lam, mu, rp, rd)
                if max(rp_b, rd_b) <= tol or iteration == max_iters:
                    return finish(z_b, lam_b, mu_b, rp_b, rd_b, iteration)
            # Rebalance the step size when the residuals drift apart in scale
            # (the usual cure for an unscaled problem stalling on one residual).
            if iteration % _ADAPT_EVERY == 0:
                rp_rel = rp / max(
                    float(np.abs(stacked @ z).max(initial=0.0)),
                    float(np.abs(zeta).max(initial=0.0)),
                    1e-10,
                )
                rd_rel = rd / max(
                    float(np.abs(qp.H @ z).max(initial=0.0)),
                    float(np.abs(stacked.T @ y).max(initial=0.0)),
                    float(np.abs(qp.g).max(initial=0.0)),
                    1e-10,
                )
                ratio = np.sqrt(rp_rel / max(rd_rel, 1e-16))
                if ratio > 5.0 or ratio < 0.2:
                    rho_base = float(np.clip(rho_base * ratio, 1e-6, 1e6))
                    rho, rho_inv, lu = factor(rho_base)
    raise AssertionError("unreachable")


def mpc_controller(ctx, k_gain, config: MpcConfig = MpcConfig()) -> Controller:
    """Receding-horizon tracking controller solving one QP per step.

    Raises SolverFailure (wrapping the MAX_ITERS status) when a step's QP
    cannot be solved to the configured tolerance.
    """
    sysd = ctx.problem.system
    m = sysd.m
    x_ss = ctx.ss.x_ss
    u_ss = ctx.ss.u_ss
    k_gain = as_matrix(k_gain, "K")

    def act(x):
        x_dev = np.asarray(x, dtype=float) - x_ss
        qp = build_qp(ctx, k_gain, x_dev, config)
        sol = solve_qp(qp, tol=config.qp_tol, max_iters=config.qp_max_iters)
        if sol.status is not QpStatus.SOLVED:
            raise SolverFailure(
                "QP stopped at residuals "
                f"({sol.primal_residual:.2e}, {sol.dual_residual:.2e}) after {sol.iterations} iterations"
            )
        return sol.z[:m] + u_ss

    return Controller("mpc", act)
