"""Shared construction helpers for the test suite."""

import numpy as np

import avgtrack as at


def scalar_problem():
    """The bundled benchmark problem: x+ = 2x + u, y = x, Q = R = 1, reference 1."""
    return at.TrackingProblem(at.LinearSystem(2.0, 1.0, 1.0), 1.0, 1.0, [1.0])


def scalar_context(convention=at.Convention.PLAIN):
    prob = scalar_problem()
    return at.StageContext(prob, at.steady_state(prob, convention))


def random_tracking_problem(rng, n, m, convention=at.Convention.PLAIN):
    """Random problem with p == m satisfying controllability, observability,
    and an invertible steady-state block; rejection-sampled deterministically."""
    while True:
        a = rng.uniform(-1.2, 1.2, (n, n))
        b = rng.uniform(-1.5, 1.5, (n, m))
        c = rng.uniform(-1.5, 1.5, (m, n))
        qh = rng.uniform(-1.0, 1.0, (m, m))
        q = qh @ qh.T + np.eye(m) * rng.uniform(0.3, 1.5)
        rh = rng.uniform(-1.0, 1.0, (m, m))
        r = rh @ rh.T + np.eye(m) * rng.uniform(0.3, 1.5)
        r_ss = rng.uniform(-2.0, 2.0, m)
        try:
            sysd = at.LinearSystem(a, b, c)
            prob = at.TrackingProblem(sysd, q, r, r_ss)
            ss = at.steady_state(prob, convention)
        except at.errors.AvgTrackError:
            continue
        if np.abs(ss.x_ss).max() > 50.0 or np.abs(ss.u_ss).max() > 50.0:
            continue  # nearly singular block; keep the numerics tame
        if not (at.check_controllable(sysd) and at.check_observable(sysd, q)):
            continue
        return prob


def random_context(rng, n, m, convention=at.Convention.PLAIN):
    prob = random_tracking_problem(rng, n, m, convention)
    return at.StageContext(prob, at.steady_state(prob, convention))


def rollout_tail_gain(ctqc, r, k, a_cl, length):
    """Quadratic weight of an `length`-stage rollout under the fixed gain."""
    p = np.zeros_like(ctqc)
    stage = ctqc + k.T @ r @ k
    for _ in range(length):
        p = a_cl.T @ p @ a_cl + stage
    return p


def finite_horizon_first_gain(sysd, ctqc, r, k, n_free, n_roll):
    """First-stage gain of the horizon program via backward Riccati recursion.

    The last n_roll stages apply u~ = -K x~ (policy evaluation steps); the
    first n_free stages are unconstrained Riccati steps. Independent of the
    QP path: pure dense recursions.
    """
    a, b = sysd.A, sysd.B
    p = rollout_tail_gain(ctqc, r, k, a - b @ k, n_roll)
    first = None
    for _ in range(n_free):
        bp = b.T @ p
        first = np.linalg.solve(r + bp @ b, bp @ a)
        p = a.T @ p @ a - (bp @ a).T @ first + ctqc
    return first


def kkt_residuals(qp, sol):
    """(stationarity, primal, complementary slackness, min multiplier)."""
    z, lam, mu = sol.z, sol.eq_multipliers, sol.ineq_multipliers
    stat = qp.H @ z + qp.g
    if len(qp.f):
        stat = stat + qp.E.T @ lam
    if len(qp.h_ineq):
        stat = stat + qp.G.T @ mu
    prim = 0.0
    comp = 0.0
    mu_min = 0.0
    if len(qp.f):
        prim = float(np.abs(qp.E @ z - qp.f).max())
    if len(qp.h_ineq):
        slack = qp.h_ineq - qp.G @ z
        prim = max(prim, float(np.maximum(-slack, 0.0).max()))
        comp = float(np.abs(mu * slack).max())
        mu_min = float(mu.min())
    return float(np.abs(stat).max()), prim, comp, mu_min


def reconstruct_horizon_cost(ctx, k_gain, x0_dev, config, z):
    """Surrogate partial sum over the horizon encoded by a decision vector."""
    sysd = ctx.problem.system
    us, xs, _ = at.split_decision(z, sysd.n, sysd.m, config)
    states = [np.asarray(x0_dev, dtype=float)] + list(xs)
    total = 0.0
    for k in range(config.horizon + config.rollout):
        if k < config.horizon:
            u = us[k]
        else:
            u = -(k_gain @ states[k])
        total += at.surrogate_stage(ctx, states[k], u)
    return total
