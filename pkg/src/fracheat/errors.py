"""Exception types shared across the package."""

import numpy as np


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A configuration cannot deliver the requested accuracy or is inconsistent."""


class FactorizationError(np.linalg.LinAlgError):
    """Covariance matrix not positive definite within the jitter budget."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DivergenceError(FloatingPointError):
    """Solver field became non-finite."""

    def __init__(self, time, max_amplitude):
        super().__init__(f"field diverged at t={time!r} (max |u| before step: {max_amplitude!r})")
        self.time = time
        self.max_amplitude = max_amplitude


class DegenerateEstimateError(ZeroDivisionError):
    """Estimator denominator vanished."""


class AnalysisError(RuntimeError):
    """Post-processing (regression, aggregation) could not be carried out."""
