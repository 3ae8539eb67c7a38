"""Event-driven simulator of the weakly asymmetric exclusion process on the
discrete torus, with deterministic drift-diffusion oracles and a statistical
harness that checks the Gaussian behaviour of the origin's occupation time
at desk scale."""

__version__ = "0.1.0"

from .model import Configuration, ModelSpec, initial_entropy, jump_rate, sample_initial
from .kmc import EventSchedule, TrajectoryRecord, occupation_time_origin, run_replica
from .pde import DensityField, SemigroupSolution, apply_generator, solve_backward, solve_hydro
from .observables import (
    DeltaTestFunction,
    Mollifier,
    empirical_measure,
    fluctuation_field,
    w_field,
    z_discrete,
)
from .covariance import CovarianceOracle, SpdePath, simulate_spde, spde_ensemble
from .harness import normality_report, run_ensemble, scaling_regression

__all__ = [
    "Configuration",
    "ModelSpec",
    "initial_entropy",
    "jump_rate",
    "sample_initial",
    "EventSchedule",
    "TrajectoryRecord",
    "occupation_time_origin",
    "run_replica",
    "DensityField",
    "SemigroupSolution",
    "apply_generator",
    "solve_backward",
    "solve_hydro",
    "DeltaTestFunction",
    "Mollifier",
    "empirical_measure",
    "fluctuation_field",
    "w_field",
    "z_discrete",
    "CovarianceOracle",
    "SpdePath",
    "simulate_spde",
    "spde_ensemble",
    "normality_report",
    "run_ensemble",
    "scaling_regression",
    "__version__",
]
