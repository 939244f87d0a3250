"""Spectral exponential-Euler solver for du = mu Delta_alpha u dt + sigma(u) dW.

The real line is replaced by the periodic box [-L, L) with N grid points.
Each time step applies the exact linear flow exp(-mu |xi|^alpha dt) to the
Fourier modes and adds the noise forcing sigma(u) * eta, with eta the cell
average of space-time white noise (variance dt / dx per cell).

Two forcing weights are available:

* ``scheme="plain"``: u_hat <- exp(-psi dt) (u_hat + F[sigma(u) eta])
* ``scheme="exact"`` (default): u_hat <- exp(-psi dt) u_hat
  + sqrt((1 - exp(-2 psi dt)) / (2 psi dt)) F[sigma(u) eta], which makes
  each mode an exact Ornstein-Uhlenbeck transition when sigma is constant.

Frequencies above the grid cutoff Xi = pi N / (2L) carry a share of the
temporal increment variance that decays only like Xi^(1 - alpha). At the
observation points they are represented by a bank of exact OU modes
(``subgrid=True``), driven by sigma of the observed value and stepped on the
observation grid. The bank feeds the observed paths only, not the grid field.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from .errors import ConfigurationError, DivergenceError, DomainError
from .gaussian_path import TemporalPath
from .model import AlphaModel, TimeGrid
from .parallel import map_blocks
from .rng import derive_seed, generator

BLOCK = 16
_NOISE_CHUNK = 64


@dataclass(frozen=True)
class Sigma:
    """Diffusion coefficient: ``constant`` c, ``affine`` a + b u, or
    ``bounded`` sigma0 + c sqrt(1 + u^2)."""

    kind: str
    params: tuple

    def __post_init__(self):
        arity = {"constant": 1, "affine": 2, "bounded": 2}
        if self.kind not in arity:
            raise DomainError(f"unknown sigma kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != arity[self.kind]:
            raise DomainError(f"sigma {self.kind} takes {arity[self.kind]} parameters, got {len(params)}")
        if self.kind == "bounded" and not params[0] > 0:
            raise DomainError("bounded sigma needs sigma0 > 0")
        object.__setattr__(self, "params", params)

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", (c,))

    @classmethod
    def affine(cls, a, b):
        return cls("affine", (a, b))

    @classmethod
    def bounded(cls, sigma0=0.5, c=0.5):
        return cls("bounded", (sigma0, c))

    @classmethod
    def parse(cls, text):
        """``"constant:1"``, ``"affine:1,0.5"`` or ``"bounded:0.5,0.5"``."""
        kind, _, rest = text.partition(":")
        try:
            params = tuple(float(v) for v in rest.split(",")) if rest else ()
        except ValueError:
            raise DomainError(f"bad sigma parameters in {text!r}") from None
        return cls(kind.strip(), params)

    def __str__(self):
        return f"{self.kind}:" + ",".join(repr(p) for p in self.params)

    @property
    def lipschitz(self):
        if self.kind == "constant":
            return 0.0
        return abs(self.params[1])

    @property
    def is_constant(self):
        return self.kind == "constant"

    def __call__(self, u):
        p = self.params
        if self.kind == "constant":
            return np.full(np.shape(u), p[0])
        if self.kind == "affine":
            return p[0] + p[1] * u
        return p[0] + p[1] * np.sqrt(1.0 + np.square(u))


@dataclass(frozen=True)
class SolverConfig:
    model: AlphaModel
    mu: float = 1.0
    domain_half_length: float = 8.0
    modes: int = 1024
    dt: float = 2.0**-13
    t_end: float = 1.0
    sigma: Sigma = field(default_factory=Sigma.constant)
    seed: int = 0
    scheme: str = "exact"
    subgrid: bool = True
    subgrid_nodes: int = 32

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigurationError(f"mu must be positive, got {self.mu!r}")
        n = self.modes
        if int(n) != n or n % 2 or n < 64:
            raise ConfigurationError(f"modes must be an even integer >= 64, got {n!r}")
        if not (0 < self.dt <= self.t_end):
            raise ConfigurationError(f"need 0 < dt <= t_end, got dt={self.dt!r}, t_end={self.t_end!r}")
        need = 5.0 * (self.mu * self.t_end) ** (1.0 / self.model.alpha)
        if self.domain_half_length < need:
            raise ConfigurationError(
                f"domain_half_length={self.domain_half_length!r} < 5 (mu t_end)^(1/alpha) = {need:.4g}"
            )
        if self.scheme not in ("exact", "plain"):
            raise ConfigurationError(f"scheme must be 'exact' or 'plain', got {self.scheme!r}")
        if not isinstance(self.sigma, Sigma):
            raise ConfigurationError("sigma must be a Sigma descriptor")

    @property
    def dx(self):
        return 2.0 * self.domain_half_length / self.modes

    @property
    def x_grid(self):
        return -self.domain_half_length + self.dx * np.arange(self.modes)

    @property
    def wavenumbers(self):
        """xi_j for the rfft modes j = 0..N/2."""
        return math.pi / self.domain_half_length * np.arange(self.modes // 2 + 1)

    @property
    def cutoff(self):
        return math.pi * self.modes / (2.0 * self.domain_half_length)

    @property
    def steps(self):
        k = round(self.t_end / self.dt)
        if abs(k * self.dt - self.t_end) > 1e-9 * self.dt:
            raise ConfigurationError("t_end must be a multiple of dt")
        return k

    def multipliers(self):
        """(decay, forcing) factors per rfft mode."""
        psi = self.mu * self.wavenumbers**self.model.alpha
        decay = np.exp(-psi * self.dt)
        if self.scheme == "plain":
            return decay, decay
        z = psi * self.dt
        with np.errstate(divide="ignore", invalid="ignore"):
            forcing = np.sqrt(np.where(z > 0, -np.expm1(-2.0 * z) / (2.0 * z), 1.0))
        return decay, forcing


@dataclass
class FieldState:
    time: float
    values: np.ndarray
    x_grid: np.ndarray


def step(config, state, noise):
    """One exponential-Euler step; ``noise`` is the scaled cell noise eta (variance dt/dx)."""
    if state.time + config.dt > config.t_end + 1e-9 * config.dt:
        raise DomainError(f"step would pass t_end={config.t_end!r}")
    decay, forcing = config.multipliers()
    u = state.values
    with np.errstate(invalid="ignore", over="ignore"):  # non-finite output is reported below
        u_hat = np.fft.rfft(u, axis=-1)
        f_hat = np.fft.rfft(config.sigma(u) * noise, axis=-1)
        new = np.fft.irfft(decay * u_hat + forcing * f_hat, n=config.modes, axis=-1)
    if not np.all(np.isfinite(new)):
        raise DivergenceError(state.time + config.dt, float(np.max(np.abs(u))))
    return FieldState(state.time + config.dt, new, state.x_grid)


def zero_state(config):
    return FieldState(0.0, np.zeros(config.modes), config.x_grid)


# ---------------------------------------------------------------- subgrid bank


def subgrid_rule(config):
    """Frequencies and weights of the unresolved band (Xi, inf).

    With s = xi^(1-alpha), (1/pi) int_Xi^inf f(xi) dxi becomes an integral
    over (0, Xi^(1-alpha)] whose integrand stays bounded; Gauss-Legendre
    nodes in s give the bank.
    """
    a = config.model.alpha
    top = config.cutoff ** (1.0 - a)
    x, w = np.polynomial.legendre.leggauss(config.subgrid_nodes)
    s = 0.5 * top * (x + 1.0)
    xi = s ** (-1.0 / (a - 1.0))
    weights = 0.5 * top * w * xi**a / ((a - 1.0) * math.pi)
    return xi, weights


class _SubgridBank:
    def __init__(self, config, x_obs, gens):
        self.xi, self.w = subgrid_rule(config)
        self.psi = config.mu * self.xi**config.model.alpha
        self.cos = np.cos(np.outer(x_obs, self.xi))  # (P, K)
        self.sin = np.sin(np.outer(x_obs, self.xi))
        self.state = np.zeros((len(gens), len(x_obs), self.xi.size))
        self.gens = gens

    def advance(self, h, sig):
        """Exact OU step of length h with sigma frozen; ``sig`` has shape (R, P)."""
        k = self.xi.size
        decay = np.exp(-self.psi * h)
        amp = np.sqrt(self.w * -np.expm1(-2.0 * self.psi * h) / (2.0 * self.psi))
        z = np.stack([g.standard_normal((2, k)) for g in self.gens])  # (R, 2, K)
        zeta = z[:, None, 0, :] * self.cos[None] + z[:, None, 1, :] * self.sin[None]
        self.state = decay * self.state + sig[:, :, None] * amp * zeta

    def value(self):
        return self.state.sum(axis=-1)


def _observation_steps(config, obs_times):
    """Solver step indices of the observation times; they must form a uniform grid."""
    if obs_times.t2 > config.t_end + 1e-9 * config.dt:
        raise ConfigurationError(f"observation end {obs_times.t2!r} beyond t_end={config.t_end!r}")
    k = np.rint(np.asarray(obs_times.points) / config.dt).astype(np.int64)
    gaps = np.diff(k)
    if np.any(np.abs(k * config.dt - obs_times.points) > 0.5 * config.dt) or np.any(gaps != gaps[0]):
        raise ConfigurationError("observation times do not snap to a uniform set of solver steps")
    if gaps[0] < 4:
        raise ConfigurationError(f"observation spacing must be >= 4 dt (got {int(gaps[0])} dt)")
    return k


def snapped_grid(config, obs_times):
    """The observation grid moved onto the solver steps it snaps to."""
    k = _observation_steps(config, obs_times)
    if np.array_equal(k * config.dt, obs_times.points):
        return obs_times
    return TimeGrid(k[0] * config.dt, k[-1] * config.dt, obs_times.n)


def _observation_indices(config, obs_points):
    x = np.asarray(obs_points, dtype=float)
    idx = np.rint((x + config.domain_half_length) / config.dx).astype(np.int64)
    if np.any(np.abs(config.x_grid[idx % config.modes] - x) > 1e-6 * config.dx):
        raise ConfigurationError("observation points must lie on the spatial grid")
    if np.any(np.abs(x) > 0.5 * config.domain_half_length):
        raise ConfigurationError("observation points must lie in the middle half of the domain")
    return idx


@dataclass
class SolverOutput:
    """Observed paths for a set of replications.

    ``u`` and ``sigma2`` have shape (replications, points, n + 1).
    """

    config: SolverConfig
    grid: TimeGrid
    points: np.ndarray
    seeds: list
    u: np.ndarray
    sigma2: np.ndarray

    def paths(self, replication=0):
        return [
            TemporalPath(self.grid, self.u[replication, p], "solver-nonlinear", self.seeds[replication])
            for p in range(len(self.points))
        ]

    def select(self, indices):
        """Output restricted to the observation points at ``indices``."""
        idx = list(indices)
        return SolverOutput(self.config, self.grid, self.points[idx], self.seeds, self.u[:, idx], self.sigma2[:, idx])

    def coarsen(self, factor):
        return SolverOutput(
            self.config, self.grid.coarsen(factor), self.points, self.seeds,
            self.u[:, :, ::factor], self.sigma2[:, :, ::factor],
        )


def _run_block(config, seeds, obs_times, obs_idx, snapshot_steps=()):
    """Integrate one block of replications; returns (u_obs, sigma2_obs, snapshots)."""
    r = len(seeds)
    n_modes = config.modes
    steps = config.steps
    obs_k = _observation_steps(config, obs_times)
    obs_pos = {int(k): i for i, k in enumerate(obs_k)}
    snap_pos = {int(k): i for i, k in enumerate(snapshot_steps)}
    decay, forcing = config.multipliers()
    noise_scale = math.sqrt(config.dt / config.dx)
    field_gens = [generator(derive_seed(s, 0)) for s in seeds]
    bank = None
    if config.subgrid:
        bank = _SubgridBank(config, config.x_grid[obs_idx], [generator(derive_seed(s, 1)) for s in seeds])
    p = len(obs_idx)
    u_obs = np.zeros((r, p, obs_k.size))
    snaps = np.zeros((r, len(snapshot_steps), n_modes))
    u = np.zeros((r, n_modes))
    u_hat = np.zeros((r, n_modes // 2 + 1), dtype=complex)
    last_obs_k, sub_prev = 0, np.zeros((r, p))
    last_k = int(obs_k[-1])
    if 0 in obs_pos:
        u_obs[:, :, obs_pos[0]] = 0.0
    sig = config.sigma
    for c0 in range(0, last_k, _NOISE_CHUNK):
        c1 = min(c0 + _NOISE_CHUNK, last_k)
        eta = np.stack([g.standard_normal((c1 - c0, n_modes)) for g in field_gens], axis=1)
        eta *= noise_scale
        for j in range(c1 - c0):
            k = c0 + j + 1
            if sig.is_constant:
                f_hat = sig.params[0] * np.fft.rfft(eta[j], axis=-1)
            else:
                f_hat = np.fft.rfft(sig(u) * eta[j], axis=-1)
            u_hat = decay * u_hat + forcing * f_hat
            u = np.fft.irfft(u_hat, n=n_modes, axis=-1)
            if k in obs_pos or k in snap_pos or k % 256 == 0:
                if not np.all(np.isfinite(u)):
                    raise DivergenceError(k * config.dt, float(np.nanmax(np.abs(u))))
            if k in snap_pos:
                snaps[:, snap_pos[k]] = u
            if k in obs_pos:
                if bank is not None:
                    # sigma frozen at the previous observation (left point)
                    bank.advance((k - last_obs_k) * config.dt, sig(sub_prev))
                    observed = u[:, obs_idx] + bank.value()
                else:
                    observed = u[:, obs_idx]
                u_obs[:, :, obs_pos[k]] = observed
                sub_prev = observed
                last_obs_k = k
    sigma2 = np.square(sig(u_obs))
    return u_obs, sigma2, snaps


def solve_ensemble(config, obs_times, obs_points, replications, workers=1, snapshot_times=()):
    """Simulate ``replications`` independent solutions observed on ``obs_times`` x ``obs_points``.

    Replication i uses seed derive_seed(config.seed, i); the field noise and
    the subgrid bank draw from separate child streams of that seed.
    """
    if replications < 1:
        raise DomainError("replications must be >= 1")
    obs_idx = _observation_indices(config, obs_points)
    _observation_steps(config, obs_times)
    snap_k = [int(round(t / config.dt)) for t in snapshot_times]
    seeds = [derive_seed(config.seed, i) for i in range(replications)]
    blocks = [seeds[i : i + BLOCK] for i in range(0, replications, BLOCK)]
    parts = map_blocks(_run_block, [(config, b, obs_times, obs_idx, snap_k) for b in blocks], workers)
    u = np.concatenate([q[0] for q in parts])
    s2 = np.concatenate([q[1] for q in parts])
    out = SolverOutput(config, snapped_grid(config, obs_times), config.x_grid[obs_idx], seeds, u, s2)
    if snap_k:
        out.snapshots = np.concatenate([q[2] for q in parts])
    return out


def solve_path(config, obs_times, obs_points):
    """Single replication with seed ``config.seed``.

    Returns ``(paths, sigma2)``: one TemporalPath per observation point and
    an array (points, n + 1) of sigma^2(u(t_i, x_j)).
    """
    obs_idx = _observation_indices(config, obs_points)
    u, s2, _ = _run_block(config, [config.seed], obs_times, obs_idx)
    grid = snapped_grid(config, obs_times)
    paths = [TemporalPath(grid, u[0, p], "solver-nonlinear", config.seed) for p in range(len(obs_idx))]
    return paths, s2[0]


# ------------------------------------------------------- scheme moment formulas


def scheme_variance(config, t, with_subgrid=None):
    """E u(t, x)^2 of the discrete scheme for sigma == 1 at a step time t."""
    with_subgrid = config.subgrid if with_subgrid is None else with_subgrid
    k = round(t / config.dt)
    xi = config.wavenumbers
    psi = config.mu * xi**config.model.alpha
    decay, forcing = config.multipliers()
    # per-step variance contribution of mode j: forcing^2 dt, decaying by decay^2 per step
    d2 = decay**2
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = np.where(d2 < 1, -np.expm1(k * np.log(d2)) / (1.0 - d2), float(k))
    per_mode = forcing**2 * config.dt * geo
    # rfft symmetry: modes 1..N/2-1 appear twice, 0 and N/2 once
    mult = np.full(xi.size, 2.0)
    mult[0] = mult[-1] = 1.0
    total = float(np.sum(mult * per_mode)) / (2.0 * config.domain_half_length)
    if with_subgrid:
        sxi, w = subgrid_rule(config)
        spsi = config.mu * sxi**config.model.alpha
        total += float(np.sum(w * -np.expm1(-2.0 * spsi * t) / (2.0 * spsi)))
    return total


def scheme_increment_variance(config, t, h, with_subgrid=None):
    """E (u(t + h, x) - u(t, x))^2 of the discrete scheme for sigma == 1.

    t and h must be multiples of dt. Per mode the scheme is the linear
    recursion u_k = sum_m d^(k-m) f eps_m with Var eps_m = dt.
    """
    with_subgrid = config.subgrid if with_subgrid is None else with_subgrid
    k, l = round(t / config.dt), round(h / config.dt)
    decay, forcing = config.multipliers()
    d2 = decay**2

    def geo(m):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d2 < 1, -np.expm1(m * np.log(np.where(d2 < 1, d2, 0.5))) / (1.0 - d2), float(m))

    per_mode = forcing**2 * config.dt * ((1.0 - decay**l) ** 2 * geo(k) + geo(l))
    mult = np.full(decay.size, 2.0)
    mult[0] = mult[-1] = 1.0
    total = float(np.sum(mult * per_mode)) / (2.0 * config.domain_half_length)
    if with_subgrid:
        sxi, w = subgrid_rule(config)
        spsi = config.mu * sxi**config.model.alpha
        v = lambda s: -np.expm1(-2.0 * spsi * s) / (2.0 * spsi)
        total += float(np.sum(w * ((1.0 - np.exp(-spsi * h)) ** 2 * v(t) + v(h))))
    return total


def scheme_expected_qv(config, grid, with_subgrid=None):
    """Mean of n^(-1/alpha) sum Delta^2 for the scheme with sigma == 1."""
    total = sum(scheme_increment_variance(config, t, grid.delta, with_subgrid) for t in grid.points[:-1])
    return total * grid.n ** (-1.0 / config.model.alpha)


# ------------------------------------------------------------ empirical checks


@dataclass(frozen=True)
class HolderEstimate:
    p: int
    time_slope: float
    space_slope: float
    time_target: float
    space_target: float
    deltas: np.ndarray
    time_moments: np.ndarray
    lags: np.ndarray
    space_moments: np.ndarray

    @property
    def passed(self):
        tol = 0.1 * self.p
        return abs(self.time_slope - self.time_target) <= tol and abs(self.space_slope - self.space_target) <= tol


def holder_design(config, scales=6, x0=0.0):
    """Observation grid and points for the dyadic Holder regression.

    Time lags are 4 dt 2^j and space lags dx 2^k, j, k < scales.
    """
    if scales < 4:
        raise ConfigurationError("the Holder regression needs at least 4 dyadic scales")
    n = int(round(config.t_end / (4 * config.dt)))
    if n < 2 ** (scales + 1):
        raise ConfigurationError("t_end is too short for the requested time scales")
    points = [x0] + [x0 + config.dx * 2**k for k in range(scales)]
    return TimeGrid(0.0, config.t_end, n), np.array(points)


def holder_moments(output, p, scales=6, t_from=0.5):
    """Empirical E|u(t+delta) - u(t)|^p and E|u(t, x0+h) - u(t, x0)|^p from a holder_design ensemble.

    Only times t >= t_from * t_end are used so the start-up transient from
    the zero initial condition does not bias the lags.
    """
    grid = output.grid
    u = output.u
    start = int(math.ceil(t_from * grid.n))
    deltas, tm = [], []
    for j in range(scales):
        lag = 2**j
        d = u[:, 0, start + lag:] - u[:, 0, start:-lag]
        deltas.append(lag * grid.delta)
        tm.append(np.mean(np.abs(d) ** p))
    lags, sm = [], []
    for k in range(scales):
        d = u[:, k + 1, start:] - u[:, 0, start:]
        lags.append(output.points[k + 1] - output.points[0])
        sm.append(np.mean(np.abs(d) ** p))
    return np.array(deltas), np.array(tm), np.array(lags), np.array(sm)


def empirical_holder_check(config, ensemble, p=2, scales=6, workers=1):
    """Log-log slopes of the p-th moments of temporal and spatial increments.

    Targets are p (alpha-1)/(2 alpha) in time and p (alpha-1)/2 in space.
    """
    if p not in (2, 4):
        raise ConfigurationError("p must be 2 or 4")
    if ensemble < 1:
        raise DomainError("ensemble must be positive")
    grid, points = holder_design(config, scales)
    out = solve_ensemble(config, grid, points, ensemble, workers)
    return holder_from_output(config.model, out, p, scales)


def holder_from_output(model, output, p, scales=6):
    deltas, tm, lags, sm = holder_moments(output, p, scales)
    ts = float(np.polyfit(np.log(deltas), np.log(tm), 1)[0])
    ss = float(np.polyfit(np.log(lags), np.log(sm), 1)[0])
    return HolderEstimate(p, ts, ss, p * model.holder_time, p * model.holder_space, deltas, tm, lags, sm)


def write_snapshots_csv(path, output, replication=0, snapshot_times=()):
    """Dump stored field snapshots as rows t,x,u."""
    snaps = output.snapshots[replication]
    x = output.config.x_grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "x", "u"))
        for t, field_values in zip(snapshot_times, snaps):
            for xv, uv in zip(x, field_values):
                w.writerow((repr(float(t)), repr(float(xv)), repr(float(uv))))
