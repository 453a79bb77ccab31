"""Stochastic shortest path solver and Bellman-equation workbench.

Computes the optimal cost ``J*`` and the best cost over proper policies
(policies that reach the termination state in finite expected time), and
checks which value functions solve Bellman's equation on finite models.
"""

from .bellman import (
    ViOptions,
    ViTrace,
    apply_T,
    apply_T_mu,
    bellman_backup,
    evaluate_policy,
    greedy,
    residual,
    value_iteration,
)
from .errors import (
    ContractViolation,
    InfeasiblePolicyError,
    InvalidModelError,
    NonConvergenceError,
    ParameterError,
    SspError,
)
from .model import (
    CountableGenerator,
    OutcomeBranch,
    Policy,
    SspModel,
    StationaryPolicy,
    build_model,
    reachable,
    truncate,
    validate,
)

__version__ = "0.1.0"
