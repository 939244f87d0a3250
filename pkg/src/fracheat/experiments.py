"""Experiment runners behind the command line.

Each runner takes a validated ExperimentConfig and returns an
ExperimentResult: CSV columns, rows, and the named contracts it checked.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import estimation, variation
from .config import solver_config
from .covariance import cov_linear, qv_limit_linear, variance_by_quadrature
from .errors import ConfigurationError
from .gaussian_path import linear_ensemble
from .kernel import (
    KernelEvaluator, check_semigroup, check_tail_bound, gaussian_kernel, normalization_residual, scaling_residual,
)
from .model import TimeGrid


@dataclass(frozen=True)
class Contract:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    kind: str
    columns: tuple
    rows: list
    contracts: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.contracts)

    @property
    def failures(self):
        return [c.name for c in self.contracts if not c.passed]

    def check(self, name, ok, detail=""):
        self.contracts.append(Contract(name, bool(ok), detail))
        return bool(ok)


def _fmt(x):
    return f"{x:.6g}"


# ------------------------------------------------------------------ kernel

KERNEL_COLUMNS = ("check", "alpha", "t", "s", "x", "value", "tolerance", "passed")
SCALING_TOL = 2e-8
SEMIGROUP_TOL = 2e-6
NORMALIZATION_TOL = 1e-7
GAUSSIAN_TOL = 1e-8
COVARIANCE_TOL = 1e-4


def kernel_validate(cfg, workers=1):
    model = cfg.model
    ev = KernelEvaluator(model, abs_tol=1e-8)
    res = ExperimentResult("kernel-validate", KERNEL_COLUMNS, [])

    def add(check, value, tol, t="", s="", x=""):
        ok = bool(value <= tol)
        res.rows.append(dict(check=check, alpha=model.alpha, t=t, s=s, x=x, value=float(value), tolerance=tol,
                             passed=ok))
        return ok

    xs = np.linspace(-10.0, 10.0, 81)
    ok = all([add("scaling", np.max(scaling_residual(ev, t, xs)), SCALING_TOL, t=t) for t in (0.1, 1.0, 10.0)])
    res.check("scaling", ok, f"max residual <= {SCALING_TOL}")
    ok = all([add("normalization", normalization_residual(ev, t), NORMALIZATION_TOL, t=t) for t in (0.1, 1.0, 10.0)])
    res.check("normalization", ok)
    cases = ((0.5, 0.5, 0.0), (1.0, 1.0, 1.0), (0.1, 0.9, -2.0))
    ok = all([add("semigroup", check_semigroup(ev, t, s, x), SEMIGROUP_TOL, t=t, s=s, x=x) for t, s, x in cases])
    res.check("semigroup", ok)
    tail_ev = KernelEvaluator(model, abs_tol=1e-10)
    const, tail_ok = check_tail_bound(tail_ev, np.arange(0.0, 201.0))
    res.rows.append(dict(check="tail-bound", alpha=model.alpha, t=1.0, value=const, tolerance="", passed=tail_ok))
    res.check("tail-bound", tail_ok, f"constant {_fmt(const)}")
    if model.alpha == 2.0:
        ok = all([
            add("gaussian", np.max(np.abs(ev.density(t, xs) - gaussian_kernel(t, xs))), GAUSSIAN_TOL, t=t)
            for t in (0.1, 1.0)
        ])
        res.check("gaussian-match", ok)
    else:
        ok = True
        for t in (0.5, 1.0, 2.0):
            rel = abs(variance_by_quadrature(model, t) / cov_linear(model, t, t) - 1.0)
            ok &= add("covariance-quadrature", rel, COVARIANCE_TOL, t=t)
        res.check("covariance-quadrature", ok)
    return res


# --------------------------------------------------------------- variation


def _variation_row(alpha, n, m, reps, source, stat, target, l1, slope=""):
    return dict(alpha=alpha, n=n, m=m, replications=reps, source=source, statistic_mean=float(stat),
                target_mean=float(target), l1_error=float(l1), slope=slope)


def _divisors_ok(ns, n):
    if any(n % k for k in ns):
        raise ConfigurationError(f"ns: every entry must divide {n}")


def linear_qv(cfg, workers=1):
    model = cfg.model
    grid = TimeGrid(cfg.t1, cfg.t2, cfg.n)
    ns = sorted(set(cfg.ns) | {cfg.n})
    _divisors_ok(ns, cfg.n)
    values = linear_ensemble(model, grid, cfg.replications, cfg.seed, workers)
    stats, targets = variation.errors_by_level(model, grid, values, None, ns)
    res = ExperimentResult("linear-qv", variation.CSV_COLUMNS, [])
    for k, n in enumerate(ns):
        res.rows.append(_variation_row(model.alpha, n, 1, cfg.replications, "exact-linear", stats[k].mean(),
                                       targets[k].mean(), np.mean(np.abs(stats[k] - targets[k]))))
    limit = qv_limit_linear(model, grid)
    tol = cfg.tolerance or 0.03
    rel = abs(stats[-1].mean() / limit - 1.0)
    res.check("mean-within-tolerance", rel < tol, f"relative error {_fmt(rel)} vs {tol}")
    if len(ns) > 1:
        v = stats.var(axis=1, ddof=1)
        res.check("variance-decreasing", v[-1] < v[0], f"var at n={ns[-1]}: {_fmt(v[-1])}, at n={ns[0]}: {_fmt(v[0])}")
    return res


def _obs_grid(cfg, n):
    return TimeGrid(cfg.t1, cfg.t2, n)


def nonlinear_qv(cfg, workers=1):
    from .solver import solve_ensemble

    model = cfg.model
    scfg = solver_config(cfg)
    grid = _obs_grid(cfg, cfg.n)
    ns = sorted(set(cfg.ns) | {cfg.n})
    _divisors_ok(ns, cfg.n)
    out = solve_ensemble(scfg, grid, [0.0], cfg.replications, workers)
    stats, targets = variation.errors_by_level(model, grid, out.u[:, 0], out.sigma2[:, 0], ns)
    l1 = np.mean(np.abs(stats - targets), axis=1)
    res = ExperimentResult("nonlinear-qv", variation.CSV_COLUMNS, [])
    for k, n in enumerate(ns):
        res.rows.append(_variation_row(model.alpha, n, 1, cfg.replications, "solver", stats[k].mean(),
                                       targets[k].mean(), l1[k]))
    factor = cfg.tolerance or 1.5
    res.check("l1-error-decreasing", l1[-1] * factor <= l1[0],
              f"L1 error {_fmt(l1[0])} at n={ns[0]} vs {_fmt(l1[-1])} at n={ns[-1]}, required factor {factor}")
    return res


def averaged_points(scfg, ms):
    """Grid points in [0, 1) and, per m, the stride selecting x_j = j/m."""
    per_unit = 1.0 / scfg.dx
    total = int(round(per_unit))
    if abs(per_unit - total) > 1e-9:
        raise ConfigurationError("modes/half_length: the spatial step must divide 1")
    strides = {}
    for m in ms:
        if total % m:
            raise ConfigurationError(f"ms: {m} points need a spatial step dividing 1/{m}")
        strides[m] = total // m
    return np.arange(total) * scfg.dx, strides


def averaged_errors(model, out, strides):
    """Per-m L1 error of V_{n,m} against the Riemann target over all points in [0, 1)."""
    target = np.mean(variation.qv_target_nonlinear(model, out.grid, out.sigma2), axis=1)
    stats = {m: np.mean(variation.weighted_qv_array(out.u[:, ::s], model.alpha), axis=1) for m, s in strides.items()}
    return target, stats


def averaged_qv(cfg, workers=1):
    from .solver import solve_ensemble

    model = cfg.model
    scfg = solver_config(cfg)
    points, strides = averaged_points(scfg, cfg.ms)
    grid = _obs_grid(cfg, cfg.n)
    out = solve_ensemble(scfg, grid, points, cfg.replications, workers)
    target, stats = averaged_errors(model, out, strides)
    ms = sorted(strides)
    l1 = [float(np.mean(np.abs(stats[m] - target))) for m in ms]
    res = ExperimentResult("averaged-qv", variation.CSV_COLUMNS, [])
    for m, e in zip(ms, l1):
        res.rows.append(_variation_row(model.alpha, cfg.n, m, cfg.replications, "solver", stats[m].mean(),
                                       target.mean(), e))
    slope, _ = variation.fit_loglog(ms, l1)
    res.rows.append(dict(alpha=model.alpha, n=cfg.n, m="", replications=cfg.replications, source="solver",
                         slope=slope))
    bound = (1.0 - model.alpha) / 2.0 + (cfg.tolerance or 0.2)
    res.check("slope-in-m", slope <= bound, f"slope {_fmt(slope)} vs bound {_fmt(bound)}")
    return res


def rate(cfg, workers=1):
    model = cfg.model
    scfg = solver_config(cfg) if cfg.source == "solver" else None
    summary = variation.rate_experiment(model, cfg.ns, cfg.replications, cfg.source, cfg.seed, cfg.t1, cfg.t2,
                                        scfg, workers)
    res = ExperimentResult("rate", variation.CSV_COLUMNS, summary.rows())
    bound = summary.reference_slope + (cfg.tolerance or 0.15)
    if cfg.source == "exact-linear":
        res.check("slope-bound", summary.slope <= bound, f"slope {_fmt(summary.slope)} vs bound {_fmt(bound)}")
    else:
        res.check("slope-negative", summary.slope < 0, f"slope {_fmt(summary.slope)}")
    return res


# -------------------------------------------------------------- estimation


def _sweep_contracts(res, results, tol):
    final = results[-1]
    res.check("ensemble-mean", final.bias < tol, f"relative error of the mean {_fmt(final.bias)} vs {tol}")
    res.check("final-rel-error", final.rel_error_mean < tol, f"mean relative error {_fmt(final.rel_error_mean)}")
    errs = [r.rel_error_mean for r in results]
    inversions = sum(b > a for a, b in zip(errs, errs[1:]))
    res.check("monotone-sweep", inversions <= 1, f"{inversions} inversions")


def estimate_sigma2(cfg, workers=1):
    results = estimation.consistency_sweep(cfg.truth, cfg.ns, cfg.replications, "sigma2", cfg.model, cfg.seed,
                                           t2=cfg.t2, workers=workers)
    res = ExperimentResult("estimate-sigma2", estimation.CSV_COLUMNS, [r.row() for r in results])
    _sweep_contracts(res, results, cfg.tolerance or 0.03)
    return res


def estimate_mu(cfg, workers=1):
    from .solver import Sigma

    sigma = Sigma.parse(cfg.sigma)
    kw = dict(domain_half_length=cfg.half_length, modes=cfg.modes, dt=cfg.dt)
    results = estimation.consistency_sweep(cfg.mu, cfg.ns, cfg.replications, "mu", cfg.model, cfg.seed, sigma,
                                           t2=cfg.t2, workers=workers, solver_kwargs=kw)
    res = ExperimentResult("estimate-mu", estimation.CSV_COLUMNS, [r.row() for r in results])
    _sweep_contracts(res, results, cfg.tolerance or (0.10 if sigma.is_constant else 0.15))
    return res


# ------------------------------------------------------------------ solver

HOLDER_COLUMNS = ("alpha", "p", "direction", "lag", "moment", "slope", "target", "passed")
CALIBRATION_COLUMNS = ("alpha", "mu", "t", "replications", "variance", "target", "rel_error", "passed")


def holder_check(cfg, workers=1):
    from .solver import empirical_holder_check

    est = empirical_holder_check(solver_config(cfg), cfg.replications, cfg.p, workers=workers)
    res = ExperimentResult("holder-check", HOLDER_COLUMNS, [])
    tol = 0.1 * cfg.p
    for direction, lags, moments, slope, target in (
        ("time", est.deltas, est.time_moments, est.time_slope, est.time_target),
        ("space", est.lags, est.space_moments, est.space_slope, est.space_target),
    ):
        ok = abs(slope - target) <= tol
        for lag, mom in zip(lags, moments):
            res.rows.append(dict(alpha=cfg.alpha, p=cfg.p, direction=direction, lag=float(lag), moment=float(mom)))
        res.rows.append(dict(alpha=cfg.alpha, p=cfg.p, direction=direction, slope=slope, target=target, passed=ok))
        res.check(f"{direction}-slope", ok, f"slope {_fmt(slope)} vs {_fmt(target)} +- {tol}")
    return res


def calibration_points(scfg, spacing=0.5):
    """Grid points spaced ``spacing`` apart across the middle half of the domain."""
    reach = 0.5 * scfg.domain_half_length
    k = int(math.floor(reach / spacing))
    return np.round(np.arange(-k, k + 1) * spacing / scfg.dx) * scfg.dx


def calibration_variances(out, times):
    """Ensemble E u^2 at each time, pooled over all observation points."""
    idx = [int(round((t - out.grid.t1) / out.grid.delta)) for t in times]
    return np.array([np.mean(np.square(out.u[:, :, i])) for i in idx])


def solver_calibrate(cfg, workers=1):
    from .solver import solve_ensemble

    model = cfg.model
    scfg = solver_config(cfg, t_end=cfg.t2)
    if not scfg.sigma.is_constant:
        raise ConfigurationError("sigma: calibration needs a constant sigma")
    c2 = scfg.sigma.params[0] ** 2
    grid = TimeGrid(0.0, cfg.t2, 4)
    times = [0.25 * cfg.t2, 0.5 * cfg.t2, cfg.t2]
    out = solve_ensemble(scfg, grid, calibration_points(scfg), cfg.replications, workers)
    var = calibration_variances(out, times)
    res = ExperimentResult("solver-calibrate", CALIBRATION_COLUMNS, [])
    tol = cfg.tolerance or 0.10
    ok = True
    for t, v in zip(times, var):
        target = c2 * model.c_var * cfg.mu ** (-1.0 / model.alpha) * t**model.beta
        rel = abs(v / target - 1.0)
        ok &= rel < tol
        res.rows.append(dict(alpha=model.alpha, mu=cfg.mu, t=t, replications=cfg.replications, variance=float(v),
                             target=float(target), rel_error=float(rel), passed=bool(rel < tol)))
    res.check("variance", ok, f"relative tolerance {tol}")
    return res


RUNNERS = {
    "kernel-validate": kernel_validate,
    "linear-qv": linear_qv,
    "nonlinear-qv": nonlinear_qv,
    "averaged-qv": averaged_qv,
    "rate": rate,
    "estimate-sigma2": estimate_sigma2,
    "estimate-mu": estimate_mu,
    "holder-check": holder_check,
    "solver-calibrate": solver_calibrate,
}


def run_experiment(cfg, workers=1):
    return RUNNERS[cfg.experiment](cfg, workers)
