"""Flat ``key = value`` experiment configs.

Blank lines and ``#`` comments are ignored. Unknown keys are rejected.
Lists are comma separated. Every problem is reported as ``field: message``.
"""

from dataclasses import asdict, dataclass, fields, replace
import math

from .errors import ConfigurationError
from .model import AlphaModel, TimeGrid

KINDS = (
    "kernel-validate", "linear-qv", "nonlinear-qv", "averaged-qv", "rate",
    "estimate-sigma2", "estimate-mu", "holder-check", "solver-calibrate",
)
SOLVER_KINDS = ("nonlinear-qv", "averaged-qv", "estimate-mu", "holder-check", "solver-calibrate")


class ConfigError(ConfigurationError):
    """Invalid config; ``problems`` lists (field, message) pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    alpha: float = 1.5
    t1: float = 0.0
    t2: float = 1.0
    n: int = None
    ns: tuple = None
    ms: tuple = None
    replications: int = None
    seed: int = 0
    source: str = "exact-linear"
    truth: float = 1.0
    mu: float = 1.0
    sigma: str = None
    modes: int = 1024
    half_length: float = 8.0
    dt: float = 2.0**-13
    t_end: float = None
    p: int = 2
    tolerance: float = None

    def echo(self):
        """Config text that reproduces this run when loaded back."""
        lines = []
        for k, v in asdict(self).items():
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def as_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @property
    def model(self):
        return AlphaModel(self.alpha)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_LISTS = {"ns": int, "ms": int}


def _convert(key, text):
    if key in _LISTS:
        parts = [s.strip() for s in text.split(",") if s.strip()]
        return tuple(_LISTS[key](s) for s in parts)
    kind = _TYPES[key]
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    return text


def parse_text(text):
    values, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append((f"line {lineno}", "expected key = value"))
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            problems.append((key, "unknown key"))
            continue
        if key in values:
            problems.append((key, "given twice"))
            continue
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            problems.append((key, f"cannot parse {val!r} ({exc})"))
    if "experiment" not in values and not any(k == "experiment" for k, _ in problems):
        problems.append(("experiment", "missing"))
    if problems:
        raise ConfigError(problems)
    return validate(ExperimentConfig(**values))


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([("config", str(exc))]) from exc
    return parse_text(text)


_DEFAULTS = {
    "kernel-validate": dict(),
    "linear-qv": dict(n=4096, ns=(256, 4096), replications=500),
    "nonlinear-qv": dict(ns=(256, 2048), replications=300, sigma="affine:1,0.5"),
    "averaged-qv": dict(n=2048, ms=(4, 16, 64), replications=300, sigma="affine:1,0.5"),
    "rate": dict(ns=(256, 512, 1024, 2048, 4096, 8192), replications=300),
    "estimate-sigma2": dict(ns=(256, 1024, 4096), replications=500),
    "estimate-mu": dict(ns=(256, 512, 1024, 2048), replications=300, sigma="constant:1"),
    "holder-check": dict(replications=200, sigma="constant:1"),
    "solver-calibrate": dict(replications=300, sigma="constant:1"),
}


def with_defaults(cfg):
    """Fill per-experiment defaults for fields left unset."""
    extra = {k: v for k, v in _DEFAULTS[cfg.experiment].items() if getattr(cfg, k) is None}
    if cfg.ns is None and cfg.n is not None and "ns" in extra:
        extra["ns"] = tuple(v for v in extra["ns"] if v < cfg.n) + (cfg.n,)
    ns = extra.get("ns", cfg.ns)
    if cfg.n is None and "n" not in extra and ns:
        extra["n"] = ns[-1]
    if cfg.t_end is None:
        extra["t_end"] = cfg.t2
    return replace(cfg, **extra)


def solver_config(cfg, **overrides):
    from .solver import Sigma, SolverConfig

    kw = dict(model=cfg.model, mu=cfg.mu, domain_half_length=cfg.half_length, modes=cfg.modes, dt=cfg.dt,
              t_end=cfg.t_end, sigma=Sigma.parse(cfg.sigma or "constant:1"), seed=cfg.seed)
    kw.update(overrides)
    return SolverConfig(**kw)


def _bounded_below(sigma):
    if sigma.kind == "constant":
        return sigma.params[0] != 0
    return sigma.kind == "bounded" and sigma.params[1] >= 0


def validate(cfg):
    """Re-run the domain constructors and report violations by field."""
    problems = []
    if cfg.experiment not in KINDS:
        raise ConfigError([("experiment", f"must be one of {', '.join(KINDS)}")])
    cfg = with_defaults(cfg)

    def check(name, fn):
        try:
            fn()
        except (ValueError, ConfigurationError, ArithmeticError) as exc:
            problems.append((name, str(exc)))

    check("alpha", lambda: AlphaModel(cfg.alpha))
    check("t1/t2", lambda: TimeGrid(cfg.t1, cfg.t2, 1))
    if cfg.replications is not None and cfg.replications < 1:
        problems.append(("replications", "must be >= 1"))
    for key in ("ns", "ms"):
        seq = getattr(cfg, key)
        if seq is not None and (not seq or any(v < 1 for v in seq) or list(seq) != sorted(set(seq))):
            problems.append((key, "must be increasing positive integers"))
    if cfg.n is not None and cfg.n < 1:
        problems.append(("n", "must be >= 1"))
    if cfg.experiment == "rate" and cfg.source not in ("exact-linear", "solver"):
        problems.append(("source", "must be exact-linear or solver"))
    if cfg.experiment == "rate" and cfg.replications is not None and cfg.replications < 200:
        problems.append(("replications", "the rate experiment needs at least 200"))
    if cfg.experiment == "holder-check" and cfg.p not in (2, 4):
        problems.append(("p", "must be 2 or 4"))
    if cfg.experiment == "estimate-sigma2" and not cfg.truth > 0:
        problems.append(("truth", "must be positive"))
    if cfg.tolerance is not None and not cfg.tolerance > 0:
        problems.append(("tolerance", "must be positive"))
    if not 0 <= cfg.seed < 2**64:
        problems.append(("seed", "must be a 64-bit unsigned integer"))
    needs_solver = cfg.experiment in SOLVER_KINDS or (cfg.experiment == "rate" and cfg.source == "solver")
    if needs_solver and not problems:
        from .solver import Sigma

        if not cfg.mu > 0:
            problems.append(("mu", f"must be positive, got {cfg.mu!r}"))
        else:
            try:
                Sigma.parse(cfg.sigma or "constant:1")
            except (ValueError, ConfigurationError) as exc:
                problems.append(("sigma", str(exc)))
            else:
                check("solver", lambda: solver_config(cfg))
                if cfg.experiment == "estimate-mu" and not _bounded_below(Sigma.parse(cfg.sigma)):
                    problems.append(("sigma", "estimate-mu needs sigma bounded below by a positive constant"))
    if problems:
        raise ConfigError(problems)
    return cfg
