"""Fractional stochastic heat equation: kernel, simulation, variation statistics and estimators."""

from .errors import (
    AnalysisError,
    ConfigurationError,
    DegenerateEstimateError,
    DivergenceError,
    DomainError,
    FactorizationError,
)
from .model import AlphaModel, TimeGrid
from .specfun import lanczos_gamma
from .kernel import KernelEvaluator, fourier_transform, green_function
from .covariance import (
    cov_linear,
    increment_cross,
    increment_variance_exact,
    pair_second_moment,
    qv_limit_linear,
)
from .gaussian_path import TemporalPath, regenerate_batch, simulate_linear
from .solver import SolverConfig, FieldState, Sigma, solve_path, step
from .variation import averaged_qv, qv_target_nonlinear, rate_experiment, weighted_qv
from .estimation import consistency_sweep, estimate_mu, estimate_sigma2

__version__ = "0.1.0"
