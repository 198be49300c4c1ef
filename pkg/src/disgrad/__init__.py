"""Distributed subgradient optimization with inexact first-order oracles.

A library plus experiment runner for the synchronous multi-agent iteration
``x_i(k+1) = sum_j w_ij(k) x_j(k) - alpha_k g_i(k)`` where each agent's
gradient comes from a (delta, L) inexact oracle and the communication graph
varies over rounds.
"""

from .dynamics import (
    AccuracySchedule,
    NetworkState,
    ScheduleClassification,
    StepSchedule,
    average_and_error,
    average_update_residual,
    classify_schedule,
    run,
    step,
)
from .errors import (
    AssumptionViolation,
    ConfigError,
    DisgradError,
    InvalidParameter,
    RunAborted,
)
from .graphs import (
    GraphPhase,
    GraphSchedule,
    MixingSchedule,
    WeightMatrix,
    build_mixing,
    metropolis_weights,
    phi_product,
    randomized_weights,
    validate_weights,
)
from .metrics import (
    AggregatedOracleCheck,
    RunRecord,
    Snapshot,
    aggregated_oracle_check,
    consensus_error,
    theorem1_window_bound,
    theorem2_convergence_check,
    true_objective,
    write_records_csv,
    write_trajectory_csv,
)
from .oracles import (
    AccuracyBounds,
    CertificationReport,
    ExactQuadraticOracles,
    LassoHuberOracles,
    LassoLocalProblem,
    NoisyQuadraticOracles,
    OracleResponse,
    OracleSpec,
    certify_oracle,
    default_probes,
    huber,
    huber_grad,
    lasso_oracle_eval,
    noisy_oracle_eval,
    scale_oracle,
    spectral_norm_sq,
    sum_oracles,
)
from .reference import (
    ReferenceSolution,
    grid_refine_1d,
    soft_threshold,
    solve_lasso_prox,
    solve_quadratic_sum,
)

__version__ = "0.1.0"
