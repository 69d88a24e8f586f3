"""Simulation and likelihood-based learning of stochastic reaction networks."""

from .basis import BasisFunction, BasisKind, BasisLibrary, ReactionBasis, eval_basis
from .errors import (
    ConfigError,
    CRNError,
    DivergedError,
    DomainError,
    InconsistentDataError,
    InvalidInputError,
    InvalidStartError,
    NoInformationError,
    SimulationDivergedError,
)
from .estimators import (
    KnownStructureProblem,
    NetworkFit,
    SparseLearnProblem,
    build_preconditioner,
    curvature_scales,
    estimate_rates_closed_form,
    estimate_rates_gradient,
    learn_network,
    learn_rates,
    subgradient_residual,
)
from .fista import FistaConfig, ProximalProblem, SolverReport, shrinkage, solve
from .likelihood import (
    hessian_exact,
    hessian_smoothed,
    neg_log_likelihood_exact,
    neg_log_likelihood_smoothed,
    precompute,
)
from .model import Reaction, ReactionKind, ReactionNetwork, mass_action_propensity
from .smoothing import g_eps, ln_g_eps
from .ssa import ChannelSummary, Trajectory, TrajectorySet, identify_channels, simulate, simulate_many

__version__ = "0.1.0"
