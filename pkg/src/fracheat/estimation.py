"""Noise-level and drift estimators built on the weighted quadratic variation."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEstimateError, DomainError
from .gaussian_path import linear_ensemble
from .model import AlphaModel, TimeGrid

CSV_COLUMNS = ("estimator", "alpha", "truth", "n", "replications", "estimate_mean", "rel_error_mean", "rel_error_sd")


@dataclass(frozen=True)
class EstimatorResult:
    estimator: str
    alpha: float
    truth: float
    n: int
    replications: int
    estimate: float
    rel_error_mean: float
    rel_error_sd: float

    @property
    def bias(self):
        """Relative error of the ensemble mean, |mean - truth| / truth."""
        return abs(self.estimate - self.truth) / self.truth

    def row(self):
        return dict(estimator=self.estimator, alpha=self.alpha, truth=self.truth, n=self.n,
                    replications=self.replications, estimate_mean=self.estimate,
                    rel_error_mean=self.rel_error_mean, rel_error_sd=self.rel_error_sd)


def _sum_sq(values):
    ss = np.sum(np.square(np.diff(np.asarray(values, dtype=float), axis=-1)), axis=-1)
    if np.any(ss == 0):
        raise DegenerateEstimateError("path has no increments of positive size")
    return ss


def sigma2_estimates(values, model, grid):
    """sum Delta^2 / (n^(1/alpha) c_qv (T2 - T1)^beta) along the last axis."""
    return _sum_sq(values) / (grid.n ** (1.0 / model.alpha) * model.c_qv * grid.length**model.beta)


def mu_estimates(values, sigma2, model, grid):
    """[c_qv (T2 - T1)^beta n^(-beta) sum_{i>=1} sigma^2 / sum Delta^2]^alpha along the last axis."""
    s2 = np.asarray(sigma2, dtype=float)
    if s2.shape[-1] != grid.n + 1:
        raise DomainError("sigma record does not match the grid")
    num = model.c_qv * grid.length**model.beta * grid.n ** (-model.beta) * np.sum(s2[..., 1:], axis=-1)
    return (num / _sum_sq(values)) ** model.alpha


def estimate_sigma2(path, model):
    return float(sigma2_estimates(path.values, model, path.grid))


def estimate_mu(path, sigma_record, model):
    return float(mu_estimates(path.values, sigma_record, model, path.grid))


def summarize(estimator, model, truth, grid, estimates):
    est = np.asarray(estimates, dtype=float)
    rel = np.abs(est - truth) / truth
    return EstimatorResult(estimator, model.alpha, float(truth), grid.n, est.size, float(est.mean()),
                           float(rel.mean()), float(rel.std(ddof=1)) if est.size > 1 else 0.0)


def consistency_sweep(truth, ns, replications, which, model=None, base_seed=0, sigma=None, t2=1.0,
                      workers=1, solver_kwargs=None):
    """EstimatorResult per n, all levels subsampled from one ensemble at the finest n.

    ``which="sigma2"`` scales exact linear paths by sqrt(truth); ``which="mu"``
    runs the solver with drift ``truth`` and the given sigma (default constant 1).
    """
    model = model or AlphaModel(1.5)
    ns = [int(n) for n in ns]
    if not ns or sorted(ns) != ns or ns[0] < 1 or any(ns[-1] % n for n in ns):
        raise DomainError(f"grid sizes must be increasing divisors of the finest size, got {ns}")
    if not truth > 0:
        raise DomainError("truth must be positive")
    grid = TimeGrid(0.0, t2, ns[-1])
    if which == "sigma2":
        values = math.sqrt(truth) * linear_ensemble(model, grid, replications, base_seed, workers)
        sigma2 = None
    elif which == "mu":
        from .solver import Sigma, SolverConfig, solve_ensemble

        cfg = SolverConfig(model, mu=truth, t_end=t2, sigma=sigma or Sigma.constant(), seed=base_seed,
                           **(solver_kwargs or {}))
        out = solve_ensemble(cfg, grid, [0.0], replications, workers)
        values, sigma2 = out.u[:, 0], out.sigma2[:, 0]
    else:
        raise DomainError(f"unknown estimator {which!r}")
    results = []
    for n in ns:
        f = grid.n // n
        g = grid.coarsen(f) if f > 1 else grid
        if which == "sigma2":
            est = sigma2_estimates(values[:, ::f], model, g)
        else:
            est = mu_estimates(values[:, ::f], sigma2[:, ::f], model, g)
        results.append(summarize(which, model, truth, g, est))
    return results
