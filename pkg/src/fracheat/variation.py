"""Weighted quadratic variation of temporal paths and its limiting targets."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AnalysisError, DomainError
from .gaussian_path import linear_ensemble
from .model import TimeGrid

LINEAR = "linear-constant-target"
NONLINEAR = "nonlinear-integral-target"
CSV_COLUMNS = ("alpha", "n", "m", "replications", "source", "statistic_mean", "target_mean", "l1_error", "slope")


@dataclass(frozen=True)
class VariationResult:
    statistic: float
    target: float
    n: int
    alpha: float
    kind: str = LINEAR
    abs_error: float = field(init=False)

    def __post_init__(self):
        if self.kind not in (LINEAR, NONLINEAR):
            raise DomainError(f"unknown kind {self.kind!r}")
        if self.n < 1 or not self.statistic >= 0:
            raise DomainError("need n >= 1 and a nonnegative statistic")
        object.__setattr__(self, "abs_error", abs(self.statistic - self.target))


def _check_uniform(grid):
    pts = np.asarray(grid.points, dtype=float)
    if pts.size < 2:
        raise DomainError("grid needs at least one increment")
    steps = np.diff(pts)
    h = (pts[-1] - pts[0]) / (pts.size - 1)
    if not h > 0 or np.max(np.abs(steps - h)) > 1e-9 * h:
        raise DomainError("weighted quadratic variation needs a uniform time grid")


def weighted_qv_array(values, alpha):
    """n^(-1/alpha) sum of squared increments along the last axis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1] - 1
    if n < 1:
        raise DomainError("path needs at least one increment")
    return np.sum(np.square(np.diff(values, axis=-1)), axis=-1) * n ** (-1.0 / alpha)


def weighted_qv(path, model):
    """n^(-1/alpha) sum_i (u(t_i) - u(t_{i-1}))^2 for a path on a uniform grid."""
    _check_uniform(path.grid)
    return float(weighted_qv_array(path.values, model.alpha))


def qv_target_nonlinear(model, grid, sigma_record):
    """c_qv (T2 - T1)^(-1/alpha) delta sum_{i=1..n} sigma^2(u(t_i)).

    ``sigma_record`` holds sigma^2 on the n + 1 grid points (last axis);
    leading axes are broadcast.
    """
    rec = np.asarray(sigma_record, dtype=float)
    if rec.ndim == 0 or rec.shape[-1] != grid.n + 1:
        raise DomainError(f"sigma record of length {rec.shape[-1] if rec.ndim else 0} does not match n={grid.n}")
    riemann = grid.delta * np.sum(rec[..., 1:], axis=-1)
    out = model.c_qv * grid.length ** (-1.0 / model.alpha) * riemann
    return float(out) if np.ndim(out) == 0 else out


def averaged_qv(paths, model):
    """(1/m) sum_j weighted_qv(path_j) over paths sharing one grid."""
    if len(paths) < 1:
        raise DomainError("need at least one path")
    g0 = paths[0].grid
    for p in paths[1:]:
        if p.grid.n != g0.n or not np.array_equal(np.asarray(p.grid.points), np.asarray(g0.points)):
            raise DomainError("averaged variation needs identical grids")
    return float(np.mean([weighted_qv(p, model) for p in paths]))


def fit_loglog(xs, errors):
    """Least-squares slope and intercept of log(error) against log(x), dropping unusable points."""
    xs = np.asarray(xs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    ok = np.isfinite(errors) & (errors > 0) & (xs > 0)
    if ok.sum() < 3:
        raise AnalysisError(f"regression needs at least 3 usable points, got {int(ok.sum())}")
    slope, intercept = np.polyfit(np.log(xs[ok]), np.log(errors[ok]), 1)
    return float(slope), float(intercept)


@dataclass(frozen=True)
class RateSummary:
    alpha: float
    source: str
    ns: tuple
    replications: int
    statistic_mean: tuple
    target_mean: tuple
    l1_error: tuple
    slope: float
    intercept: float

    @property
    def reference_slope(self):
        return (1.0 - self.alpha) / (2.0 * self.alpha)

    def rows(self):
        rows = [
            dict(alpha=self.alpha, n=n, m=1, replications=self.replications, source=self.source,
                 statistic_mean=s, target_mean=t, l1_error=e, slope="")
            for n, s, t, e in zip(self.ns, self.statistic_mean, self.target_mean, self.l1_error)
        ]
        rows.append(dict(alpha=self.alpha, n="", m=1, replications=self.replications, source=self.source,
                         statistic_mean="", target_mean="", l1_error="", slope=self.slope))
        return rows


def _check_dyadic(ns):
    ns = [int(n) for n in ns]
    if len(ns) < 4:
        raise DomainError("rate experiment needs at least 4 grid sizes")
    if any(n < 1 or n & (n - 1) for n in ns) or sorted(set(ns)) != ns:
        raise DomainError(f"grid sizes must be increasing powers of two, got {ns}")
    return ns


def errors_by_level(model, grid, values, sigma2=None, ns=()):
    """Per-replication statistic and target after coarsening the finest grid to each n."""
    stats, targets = [], []
    for n in ns:
        f = grid.n // n
        g = grid.coarsen(f) if f > 1 else grid
        v = values[..., ::f]
        stats.append(weighted_qv_array(v, model.alpha))
        if sigma2 is None:
            targets.append(np.full(stats[-1].shape, model.c_qv * grid.length**model.beta))
        else:
            targets.append(qv_target_nonlinear(model, g, sigma2[..., ::f]))
    return np.array(stats), np.array(targets)


def rate_experiment(model, ns, replications, source="exact-linear", base_seed=0, t1=0.0, t2=1.0,
                    solver_config=None, workers=1):
    """Mean L1 error of the statistic per n and its log-log slope.

    Paths are simulated once at the finest n and subsampled, so all levels
    share the same realisations.
    """
    ns = _check_dyadic(ns)
    if replications < 2:
        raise DomainError("need at least 2 replications")
    grid = TimeGrid(t1, t2, ns[-1])
    if source == "exact-linear":
        values = linear_ensemble(model, grid, replications, base_seed, workers)
        sigma2 = None
    elif source == "solver":
        from .solver import SolverConfig, solve_ensemble

        cfg = solver_config or SolverConfig(model, t_end=t2, seed=base_seed)
        out = solve_ensemble(cfg, grid, [0.0], replications, workers)
        values, sigma2 = out.u[:, 0], out.sigma2[:, 0]
    else:
        raise DomainError(f"unknown source {source!r}")
    stats, targets = errors_by_level(model, grid, values, sigma2, ns)
    l1 = np.mean(np.abs(stats - targets), axis=1)
    slope, intercept = fit_loglog(ns, l1)
    return RateSummary(
        model.alpha, source, tuple(ns), replications,
        tuple(float(x) for x in stats.mean(axis=1)), tuple(float(x) for x in targets.mean(axis=1)),
        tuple(float(x) for x in l1), slope, intercept,
    )


def write_rows(path, rows, columns=CSV_COLUMNS):
    """CSV writer shared by the reports; floats are written with repr for exact reruns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in (r.get(c, "") for c in columns)])
