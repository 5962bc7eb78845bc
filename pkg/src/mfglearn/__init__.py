"""Equilibrium solvers for finite, discrete-time mean field games.

The library computes Nash equilibria and three bounded-rationality
relaxations (softmax responses on policy-evaluation, optimal, or
smooth-maximum state-action values) by generalized fixed-point iteration
and fictitious play, including receding-horizon variants with limited
lookahead, together with exact exploitability and distance-to-equilibrium
metrics and the benchmark games used in the experiment scripts.
"""

from .algorithms import (
    SolverConfig,
    SolverResult,
    diagonal_policy,
    gfp,
    gfpi,
    rh_parallel,
    rh_sequential,
)
from .games import (
    GameFormatError,
    PRNG_ALGORITHM,
    RandomMfgParams,
    RpsParams,
    SisParams,
    load_game,
    make_random,
    make_rps,
    make_sis,
    tabular_model,
)
from .metrics import (
    MetricValues,
    delta_equilibrium,
    delta_equilibrium_windowed,
    equilibrium_metrics,
    exploitability,
    exploitability_regularized,
    policy_distance,
    rh_exploitability,
)
from .model import (
    ConvergenceTrace,
    MeanFieldFlow,
    MfgModel,
    ModelViolation,
    Policy,
    PolicyEnsemble,
    QFunction,
    ValidationReport,
    normalize_rows,
    validate_model,
)
from .operators import (
    Concept,
    greedy_policy,
    log_sum_exp,
    log_sum_exp_gradient,
    mean_field_forward,
    mean_field_forward_windowed,
    objective,
    objective_regularized,
    objective_windowed,
    q_optimal,
    q_policy,
    q_soft,
    response_policy,
    softmax_policy,
)

__version__ = "0.1.0"

__all__ = [
    "Concept",
    "ConvergenceTrace",
    "GameFormatError",
    "MeanFieldFlow",
    "MetricValues",
    "MfgModel",
    "ModelViolation",
    "Policy",
    "PolicyEnsemble",
    "PRNG_ALGORITHM",
    "QFunction",
    "RandomMfgParams",
    "RpsParams",
    "SisParams",
    "SolverConfig",
    "SolverResult",
    "ValidationReport",
    "delta_equilibrium",
    "delta_equilibrium_windowed",
    "diagonal_policy",
    "equilibrium_metrics",
    "exploitability",
    "exploitability_regularized",
    "gfp",
    "gfpi",
    "greedy_policy",
    "load_game",
    "log_sum_exp",
    "log_sum_exp_gradient",
    "make_random",
    "make_rps",
    "make_sis",
    "mean_field_forward",
    "mean_field_forward_windowed",
    "normalize_rows",
    "objective",
    "objective_regularized",
    "objective_windowed",
    "policy_distance",
    "q_optimal",
    "q_policy",
    "q_soft",
    "response_policy",
    "rh_exploitability",
    "rh_parallel",
    "rh_sequential",
    "softmax_policy",
    "tabular_model",
    "validate_model",
]
