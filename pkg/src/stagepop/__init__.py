"""Simulation and verification toolkit for a juvenile/adult reaction-diffusion model."""

from .asymptotics import LimitProfile, PointParams, limit_profile, profile_convergence_study, solve_w2
from .coefficients import (
    Constant,
    GridSamples,
    ModelParams,
    Separable,
    SignCertificate,
    SpatialProfile,
    check_cor2_condition,
    check_h2,
    prop1_sign_certificate,
    validate_h1,
    validate_h3,
)
from .dynamics import (
    classify,
    find_periodic_solution,
    find_steady_state,
    verify_global_stability,
)
from .estimators import (
    FloquetEigenSolver,
    LimitProfileEstimator,
    PeriodicSolutionFinder,
    PeriodMap,
    PersistenceClassifier,
    SteadyStateSolver,
)
from .evolution import PopulationState, Trajectory, integrate, linear_propagate, max_stable_dt, step
from .geometry import Grid1D, apply_neumann_laplacian, build_grid
from .spectral import EigenPair, decay_envelope_check, kinetic_lambda, principal_eigenpair

__version__ = "0.1.0"

__all__ = [
    "Constant",
    "EigenPair",
    "FloquetEigenSolver",
    "Grid1D",
    "GridSamples",
    "LimitProfile",
    "LimitProfileEstimator",
    "ModelParams",
    "PeriodMap",
    "PeriodicSolutionFinder",
    "PersistenceClassifier",
    "PointParams",
    "PopulationState",
    "Separable",
    "SignCertificate",
    "SpatialProfile",
    "SteadyStateSolver",
    "Trajectory",
    "apply_neumann_laplacian",
    "build_grid",
    "check_cor2_condition",
    "check_h2",
    "classify",
    "decay_envelope_check",
    "find_periodic_solution",
    "find_steady_state",
    "integrate",
    "kinetic_lambda",
    "limit_profile",
    "linear_propagate",
    "max_stable_dt",
    "principal_eigenpair",
    "profile_convergence_study",
    "prop1_sign_certificate",
    "solve_w2",
    "step",
    "validate_h1",
    "validate_h3",
    "verify_global_stability",
]
