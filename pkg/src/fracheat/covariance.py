"""Second-moment structure of the linear (sigma = 1) solution u0(t, x) at a fixed x.

u0 is a scaled bifractional Brownian motion with H = 1/2, K = (alpha-1)/alpha:

    E u0(t) u0(s) = c_cov ((t + s)^beta - |t - s|^beta),   c_cov = Gamma(1/alpha) / (2 pi (alpha-1)).
"""

import math

import numpy as np

from .errors import DomainError
from .model import AlphaModel


def _check_times(*times):
    for v in times:
        if np.any(np.asarray(v) < 0):
            raise DomainError(f"times must be nonnegative, got {v!r}")


def cov_linear(model, t, s):
    """E u0(t) u0(s); broadcasts over array arguments. Zero if either time is zero."""
    _check_times(t, s)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    b = model.beta
    out = model.c_cov * ((t + s) ** b - np.abs(t - s) ** b)
    out = np.where((t == 0) | (s == 0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def covariance_matrix(model, times):
    times = np.asarray(times, dtype=float)
    return cov_linear(model, times[:, None], times[None, :])


def increment_variance_exact(model, t, delta):
    """E (u0(t + delta) - u0(t))^2."""
    if np.any(np.asarray(delta) <= 0):
        raise DomainError(f"delta must be positive, got {delta!r}")
    _check_times(t)
    t = np.asarray(t, dtype=float)
    b = model.beta
    out = model.c_var * ((t + delta) ** b - 2.0 ** (1.0 / model.alpha) * ((2 * t + delta) ** b - delta**b) + t**b)
    return float(out) if out.ndim == 0 else out


def increment_cov_difference(model, t, s, delta):
    """E Delta(t) Delta(s) as the four-term covariance difference (valid for any delta > 0)."""
    return (
        cov_linear(model, t + delta, s + delta)
        - cov_linear(model, t + delta, s)
        - cov_linear(model, t, s + delta)
        + cov_linear(model, t, s)
    )


def increment_cross(model, t, s, delta):
    """E Delta(t, delta) Delta(s, delta) for 0 <= s < t.

    Uses the expanded bracket when delta <= t - s; larger lags have a
    negative base inside the bracket and are routed through the four-term
    covariance difference.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    if not 0 <= s < t:
        raise DomainError(f"need 0 <= s < t, got s={s!r}, t={t!r}")
    if delta > t - s:
        return float(increment_cov_difference(model, t, s, delta))
    b = model.beta
    p, m = t + s, t - s
    bracket = (
        (p + 2 * delta) ** b
        - m**b
        - 2.0 * (p + delta) ** b
        + (m + delta) ** b
        + (m - delta) ** b
        + p**b
        - m**b
    )
    return model.c_cov * bracket


def pair_second_moment(model, t, s, delta):
    """E Delta^2(t) Delta^2(s) = E Delta^2(t) E Delta^2(s) + 2 (E Delta(t) Delta(s))^2.

    On the diagonal (s == t) this is the Gaussian fourth moment 3 (E Delta^2)^2.
    """
    vt = increment_variance_exact(model, t, delta)
    if s == t:
        return 3.0 * vt * vt
    if s > t:
        t, s = s, t
        vt = increment_variance_exact(model, t, delta)
    vs = increment_variance_exact(model, s, delta)
    c = increment_cross(model, t, s, delta)
    return vt * vs + 2.0 * c * c


def increment_fourth_moment(model, t, delta):
    return 3.0 * increment_variance_exact(model, t, delta) ** 2


def qv_limit_linear(model, grid):
    """Limit of n^(-1/alpha) sum (u0(t_i) - u0(t_{i-1}))^2: c_qv (T2 - T1)^beta."""
    return model.c_qv * grid.length**model.beta


def expected_weighted_qv(model, grid):
    """Exact finite-n mean of the weighted quadratic variation of u0."""
    t = grid.points[:-1]
    return float(np.sum(increment_variance_exact(model, t, grid.delta)) * grid.n ** (-1.0 / model.alpha))


def variance_by_quadrature(model, t, nodes=12, abs_tol=1e-8):
    """int_0^t int_R G_alpha(t - r, z)^2 dz dr using the kernel evaluator.

    The substitution r = w^q with q = alpha/(alpha-1) removes the r^(-1/alpha)
    endpoint singularity; the inner integral is a spatial panel rule.
    """
    from .kernel import KernelEvaluator, _outward_edges, _panels

    q = model.alpha / (model.alpha - 1.0)
    wmax = t ** (1.0 / q)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    ws = 0.5 * wmax * (xg + 1.0)
    rs = ws**q
    ev = KernelEvaluator(model, abs_tol=abs_tol, t_min=float(rs.min()))
    total = 0.0
    for w, wt, r in zip(ws, wg, rs):
        scale = r ** (1.0 / model.alpha)
        edges = _outward_edges(0.0, 0.25 * scale, 60.0 * scale, 1.2)
        z, wz = _panels(edges)
        inner = 2.0 * float(wz @ ev.density(r, z) ** 2)
        total += 0.5 * wmax * wt * inner * q * w ** (q - 1.0)
    return total
