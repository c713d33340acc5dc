"""Average-cost optimal tracking toolkit for discrete-time linear systems.

Steady-state target design, LQR synthesis, a receding-horizon controller for
the absolute-value surrogate cost, a 1-D dynamic-programming oracle, and a
closed-loop benchmark harness, plus a JSON-driven command line (`avgtrack`).
"""

from pathlib import Path

from . import errors
from .criteria import (
    StageContext,
    avg_cost_contributions,
    avg_cost_index,
    quadratic_contributions,
    quadratic_index,
    stage_cost,
    stage_deviation,
    surrogate_contributions,
    surrogate_index,
    surrogate_stage,
    tail_converged,
)
from .harness import (
    BenchmarkRow,
    Controller,
    Trajectory,
    adaptive_rollout,
    benchmark_table,
    benchmark_to_csv,
    constant_controller,
    convergence_metrics,
    exact_scalar_controller,
    rollout,
    trajectory_to_csv,
)
from .matnum import as_matrix, as_vector, cholesky, rank, solve_linear, spectral_radius
from .mpc import (
    MpcConfig,
    QpProblem,
    QpSolution,
    QpStatus,
    build_qp,
    mpc_controller,
    solve_qp,
    split_decision,
)
from .plant import (
    Convention,
    DEFAULT_CONVENTION,
    LinearSystem,
    SteadyState,
    TrackingProblem,
    check_controllable,
    check_observable,
    from_deviation,
    steady_state,
    to_deviation,
)
from .riccati import LqrSolution, lqr_gain, lqr_tracking_controller, solve_dare
from .scalar_dp import (
    Grid1D,
    ValueTable,
    bellman_residual,
    closed_form_policy,
    closed_form_value,
    table_policy_fn,
    table_value_fn,
    value_iteration,
    value_table_to_csv,
)

__version__ = "0.1.0"


def bundled_scalar_example() -> Path:
    """Path to the scalar benchmark problem file shipped with the package."""
    return Path(__file__).parent / "problems" / "scalar_example.json"
