"""Stability-index model constants and uniform time grids."""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import DomainError
from .specfun import lanczos_gamma


@dataclass(frozen=True)
class AlphaModel:
    """Stability index alpha in (1, 2] with the derived constants.

    ``c_var`` is the variance constant (E u0(t)^2 = c_var t^beta) and ``c_qv``
    the limiting weighted-quadratic-variation constant; ``c_qv = 2^(1/alpha) c_var``.
    """

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (1.0 < a <= 2.0) or math.isnan(a):
            raise DomainError(f"alpha must lie in (1, 2], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def beta(self):
        return (self.alpha - 1.0) / self.alpha

    @property
    def kappa(self):
        return 2.0 * self.alpha / (3.0 * self.alpha - 1.0)

    @cached_property
    def c_qv(self):
        return lanczos_gamma(1.0 / self.alpha) / (math.pi * (self.alpha - 1.0))

    @cached_property
    def c_var(self):
        return self.c_qv / 2.0 ** (1.0 / self.alpha)

    @property
    def c_cov(self):
        """Prefactor of ((t+s)^beta - |t-s|^beta) in the linear covariance."""
        return self.c_qv / 2.0

    @property
    def holder_time(self):
        return (self.alpha - 1.0) / (2.0 * self.alpha)

    @property
    def holder_space(self):
        return (self.alpha - 1.0) / 2.0

    @property
    def rate_exponent(self):
        """Exponent of n in the L1 rate bound, (1 - alpha)/(2 alpha)."""
        return (1.0 - self.alpha) / (2.0 * self.alpha)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = t1 + i*delta, i = 0..n."""

    t1: float
    t2: float
    n: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t1, t2, n = float(self.t1), float(self.t2), self.n
        if isinstance(n, bool) or int(n) != n or n < 1:
            raise DomainError(f"n must be a positive integer, got {n!r}")
        if not (t1 >= 0.0) or not (t2 > t1) or not math.isfinite(t2):
            raise DomainError(f"need 0 <= t1 < t2, got t1={t1!r}, t2={t2!r}")
        n = int(n)
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)
        object.__setattr__(self, "n", n)
        pts = t1 + np.arange(n + 1) * self.delta
        pts[-1] = t2
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def delta(self):
        return (self.t2 - self.t1) / self.n

    @property
    def length(self):
        return self.t2 - self.t1

    def coarsen(self, factor):
        """Sub-grid keeping every ``factor``-th point."""
        if self.n % factor:
            raise DomainError(f"n={self.n} is not divisible by {factor}")
        return TimeGrid(self.t1, self.t2, self.n // factor)
