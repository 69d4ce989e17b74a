"""Robust (max-min) monotone submodular maximization, offline and online."""

from .continuous import AscentTrace, continuous_greedy_run, decision_solve, find_direction, robust_continuous_solve
from .errors import (
    DomainError,
    GammaTooLarge,
    MatroidAxiomError,
    MembershipError,
    ParameterError,
    RoundingError,
    SizeLimitError,
)
from .functions import (
    CoverageFunction,
    FacilityLocationFunction,
    GroundSet,
    LambdaFunction,
    MixtureFunction,
    ModularFunction,
    PerturbedFunction,
    RobustAverage,
    RobustInstance,
    SetFunction,
    TruncatedFunction,
    build_robust_average,
    check_submodular_monotone,
    mix,
    perturbed_family,
)
from .harness import ExperimentConfig, generate_synthetic_ratings, run_experiment
from .matroids import (
    ExplicitMatroid,
    Intersection,
    KnapsackConstraint,
    PartitionMatroid,
    UniformMatroid,
    UnionMatroid,
    max_weight_independent_set,
    union_is_independent,
)
from .multilinear import EstimatorConfig, delta_e, multilinear_estimate, multilinear_exact
from .offline import (
    BiCriteriaSolution,
    brute_force_opt,
    distributionally_robust_solve,
    extended_bang_per_buck,
    extended_greedy,
    gamma_candidates,
    robust_intersection_solve,
    robust_knapsack_solve,
    robust_offline_solve,
)
from .online import FPLInstance, OnlineSchedule, RegretReport, fpl_step, online_softmin_run, regret_1_minus_eps
from .rounding import ConvexDecomposition, decompose, round_and_certify, swap_round
from .softmin import delta_H, softmin_gradient, softmin_value, softmin_weights

__version__ = "0.1.0"
