"""Utility-fair contextual pricing under generalized-linear demand.

Optimal fair-policy solver (grid dynamic program with a linear fast path),
cost-of-fairness curves, GLM demand estimation, and a two-phase
demand-learning bandit with regret simulation.
"""
from ._kernels import BACKEND
from .bandit import (BanditParams, RegretTrace, UcbState, implement_price,
                     init_ucb, make_params, run_bandit, run_experimentation,
                     select_arm, update_state)
from .demand import (DemandModel, LinkDomainError, LinkFunction, ModelBounds,
                     expected_revenue, link_eval, unconstrained_optimal_price,
                     validate_bounds)
from .distributions import (ContextGenerator, UtilityDistribution,
                            UtilityGrid, discretize, implied_moments,
                            moments, sample_context, sample_utility)
from .estimation import (LikelihoodSpec, ModelEstimate, Observation,
                         log_likelihood, mle_fit)
from .harness import (Environment, ExperimentConfig, loglog_slope,
                      regret_sweep, rho_curve)
from .solver import (DpSolution, PiecewiseLinearPolicy, SolverResourceError,
                     brute_force_solve, check_fairness,
                     cost_of_fairness_linear, cost_of_fairness_numeric,
                     evaluate_policy_revenue, linear_optimal_policy,
                     make_price_grid, read_policy, solve_dp, write_policy)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BanditParams", "ContextGenerator", "DemandModel",
    "DpSolution", "Environment", "ExperimentConfig", "LikelihoodSpec",
    "LinkDomainError", "LinkFunction", "ModelBounds", "ModelEstimate",
    "Observation", "PiecewiseLinearPolicy", "RegretTrace",
    "SolverResourceError", "UcbState", "UtilityDistribution", "UtilityGrid",
    "brute_force_solve", "check_fairness", "cost_of_fairness_linear",
    "cost_of_fairness_numeric", "discretize", "evaluate_policy_revenue",
    "expected_revenue", "implement_price", "implied_moments", "init_ucb",
    "linear_optimal_policy", "link_eval", "log_likelihood", "loglog_slope",
    "make_params", "make_price_grid", "mle_fit", "moments", "read_policy",
    "regret_sweep", "rho_curve", "run_bandit", "run_experimentation",
    "sample_context", "sample_utility", "select_arm", "solve_dp",
    "unconstrained_optimal_price", "update_state", "validate_bounds",
    "write_policy",
]
