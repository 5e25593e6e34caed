"""Zermelo navigation under time- and position-dependent Finsler metrics."""

__version__ = "0.1.0"

from .expressions import Expr, ExpressionError
from .metrics import (
    Causality,
    Conformal,
    ConstantRiemannian,
    DiscreteTrajectory,
    EllipticZermelo,
    EllipticZermeloParams,
    Euclidean,
    FinslerJet,
    FinslerMetric,
    MetricDomainError,
    Reversed,
    SpacetimeVector,
    classify_causal,
    energy,
    eval_elliptic_F,
    eval_jet,
    reverse,
    rollout,
    travel_time,
)
from .georce import SolverConfig, SolverError, solve
from .tacking import OptimizerConfig, TackProblem, TackSolution, optimize_tacks, total_time
