"""Exact simulation of the linear temporal process t -> u0(t, x) on a TimeGrid.

The law of u0 at a fixed point is Gaussian with the closed-form covariance
of :mod:`fracheat.covariance`; paths are drawn as L z with L the Cholesky
factor of that covariance on the grid. The fixed spatial point does not
enter the law and is not a parameter.
"""

import csv
from dataclasses import dataclass
import threading

import numpy as np
import scipy.linalg

from .covariance import cov_linear
from .errors import DomainError, FactorizationError
from .parallel import map_blocks
from .rng import derive_seed, generator

MAX_POINTS = 16384
JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10)
BLOCK = 32
_CACHE_BYTES = 1_200_000_000


@dataclass(frozen=True)
class TemporalPath:
    grid: object
    values: np.ndarray
    origin: str = "exact-linear"
    seed: int = 0

    def __post_init__(self):
        if len(self.values) != self.grid.n + 1:
            raise DomainError(f"path has {len(self.values)} values for a grid with {self.grid.n} increments")


class _FactorCache:
    """Keeps recent Cholesky factors under a byte budget."""

    def __init__(self, budget):
        self.budget = budget
        self._items = {}
        self._lock = threading.Lock()

    def get(self, key, build):
        with self._lock:
            if key in self._items:
                val = self._items.pop(key)
                self._items[key] = val
                return val
        val = build()
        with self._lock:
            self._items[key] = val
            while sum(v[0].nbytes for v in self._items.values()) > self.budget and len(self._items) > 1:
                self._items.pop(next(iter(self._items)))
        return val


_factors = _FactorCache(_CACHE_BYTES)


def _build_covariance(model, times):
    m = times.size
    out = np.empty((m, m))
    rows = max(1, (1 << 22) // max(m, 1))
    for i in range(0, m, rows):
        out[i : i + rows] = cov_linear(model, times[i : i + rows, None], times[None, :])
    return out


def cholesky_with_jitter(cov, ladder=JITTER_LADDER):
    """Lower Cholesky factor, escalating a diagonal jitter relative to max(diag).

    Returns ``(L, jitter)``; raises FactorizationError past the last rung.
    """
    scale = float(np.max(np.diag(cov)))
    diag = np.diag_indices_from(cov)
    for jitter in ladder:
        a = cov.copy() if jitter else cov
        if jitter:
            a[diag] += jitter * scale
        try:
            return scipy.linalg.cholesky(a, lower=True, overwrite_a=False, check_finite=False), jitter
        except np.linalg.LinAlgError:
            continue
    lam = float(np.linalg.eigvalsh(cov)[0])
    raise FactorizationError(
        f"covariance not positive definite after jitter {ladder[-1]:g}; smallest eigenvalue {lam:.3e}",
        min_eigenvalue=lam,
    )


def linear_factor(model, grid):
    """Cholesky factor on the grid points with positive time (u0(0) = 0 is excluded).

    Returns ``(L, first)`` where ``first`` is the index of the first point covered.
    """
    if grid.n + 1 > MAX_POINTS:
        raise DomainError(f"grid has {grid.n + 1} points; the dense sampler is capped at {MAX_POINTS}")
    key = (model.alpha, grid.t1, grid.t2, grid.n)

    def build():
        first = 1 if grid.t1 == 0 else 0
        cov = _build_covariance(model, np.asarray(grid.points[first:]))
        chol, _ = cholesky_with_jitter(cov)
        return chol, first

    return _factors.get(key, build)


def _sample_block(model, grid, seeds):
    chol, first = linear_factor(model, grid)
    m = chol.shape[0]
    z = np.zeros((m, BLOCK))
    for j, s in enumerate(seeds):
        z[:, j] = generator(s).standard_normal(m)
    out = np.zeros((len(seeds), grid.n + 1))
    out[:, first:] = (chol @ z)[:, : len(seeds)].T
    return out


def sample_linear(model, grid, seeds, workers=1):
    """Array of shape (len(seeds), n + 1); row i depends only on seeds[i] and its block slot."""
    seeds = list(seeds)
    blocks = [seeds[i : i + BLOCK] for i in range(0, len(seeds), BLOCK)]
    linear_factor(model, grid)
    parts = map_blocks(_sample_block, [(model, grid, b) for b in blocks], workers)
    if not parts:
        return np.zeros((0, grid.n + 1))
    return np.concatenate(parts, axis=0)


def simulate_linear(model, grid, seed):
    """One exact-law path of u0 on the grid; deterministic given ``seed``."""
    values = _sample_block(model, grid, [seed])[0]
    return TemporalPath(grid, values, "exact-linear", int(seed))


def batch_seeds(base_seed, count):
    return [derive_seed(base_seed, i) for i in range(count)]


def linear_ensemble(model, grid, count, base_seed, workers=1):
    """Array (count, n + 1) of independent paths with seeds derive_seed(base_seed, i)."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count!r}")
    return sample_linear(model, grid, batch_seeds(base_seed, count), workers)


def regenerate_batch(model, grid, count, base_seed, workers=1):
    """The ``linear_ensemble`` rows wrapped as TemporalPath objects."""
    values = linear_ensemble(model, grid, count, base_seed, workers)
    return [TemporalPath(grid, v, "exact-linear", s) for v, s in zip(values, batch_seeds(base_seed, count))]


def factor_reconstruction_error(model, grid):
    """max |L L^T - C| / max diag(C)."""
    chol, first = linear_factor(model, grid)
    cov = _build_covariance(model, np.asarray(grid.points[first:]))
    return float(np.max(np.abs(chol @ chol.T - cov)) / np.max(np.diag(cov)))


def write_paths_csv(path, paths):
    """CSV ``replication,i,t,u``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["replication", "i", "t", "u"])
        for r, p in enumerate(paths):
            for i, (t, u) in enumerate(zip(p.grid.points, p.values)):
                wr.writerow([r, i, repr(float(t)), repr(float(u))])
