import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.special import gamma as sp_gamma

from fracheat import (
    AlphaModel, DomainError, TimeGrid, cov_linear, increment_cross, increment_variance_exact, pair_second_moment,
    qv_limit_linear,
)
from fracheat.covariance import (
    covariance_matrix, expected_weighted_qv, increment_cov_difference, increment_fourth_moment,
    variance_by_quadrature,
)

alphas = st.sampled_from([1.1, 1.25, 1.5, 1.75, 2.0])
times = st.floats(0.0, 5.0)


def test_cov_diagonal_at_three_halves():
    m = AlphaModel(1.5)
    assert cov_linear(m, 1.0, 1.0) == pytest.approx(2 * sp_gamma(2 / 3) / (2 ** (2 / 3) * math.pi), rel=1e-13)


def test_cov_gaussian_case_matches_heat_equation():
    m = AlphaModel(2.0)
    assert cov_linear(m, 1.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-13)
    for t in (0.25, 3.0):
        assert cov_linear(m, t, t) == pytest.approx(math.sqrt(t / (2 * math.pi)), rel=1e-13)


@given(alphas, times)
def test_cov_zero_time(a, s):
    assert cov_linear(AlphaModel(a), 0.0, s) == 0.0
    assert cov_linear(AlphaModel(a), s, 0.0) == 0.0


@given(alphas, times, times)
def test_cov_symmetry_and_structure(a, t, s):
    m = AlphaModel(a)
    assert cov_linear(m, t, s) == cov_linear(m, s, t)
    if t > 0:
        assert cov_linear(m, t, t) == pytest.approx(m.c_var * t**m.beta, rel=1e-12)
    if t > 0 and s > 0:
        assert cov_linear(m, t, s) == pytest.approx(m.c_cov * ((t + s) ** m.beta - abs(t - s) ** m.beta), rel=1e-12)


def test_cov_negative_time():
    with pytest.raises(DomainError):
        cov_linear(AlphaModel(1.5), -0.1, 1.0)


@given(alphas, st.integers(2, 300), st.floats(0.01, 2.0), st.floats(0.0, 1.0))
def test_cov_matrix_psd(a, n, t2, t1_frac):
    t1 = t1_frac * t2 * 0.9
    times = np.linspace(t1, t1 + t2, n)
    eig = np.linalg.eigvalsh(covariance_matrix(AlphaModel(a), times))
    assert eig.min() >= -1e-10 * eig.max()


def test_increment_variance_examples():
    m = AlphaModel(1.5)
    assert increment_variance_exact(m, 0.0, 1.0) == pytest.approx(m.c_var, rel=1e-14)
    assert increment_variance_exact(m, 1.0, 1e-4) == pytest.approx(m.c_qv * 1e-4 ** (1 / 3), rel=0.01)
    assert increment_variance_exact(AlphaModel(2.0), 1.0, 0.01) == pytest.approx(0.1 / math.sqrt(math.pi), rel=0.02)
    with pytest.raises(DomainError):
        increment_variance_exact(m, 1.0, 0.0)


@given(alphas, st.floats(0.0, 5.0), st.floats(1e-6, 2.0))
def test_increment_variance_is_covariance_difference(a, t, d):
    m = AlphaModel(a)
    want = cov_linear(m, t + d, t + d) - 2 * cov_linear(m, t + d, t) + cov_linear(m, t, t)
    v = increment_variance_exact(m, t, d)
    assert v > 0
    assert v == pytest.approx(want, rel=1e-9, abs=1e-13)


@pytest.mark.parametrize("a", [1.25, 1.5, 1.75])
def test_leading_order_residual_is_small_against_delta_beta(a):
    # residual after removing c_qv delta^beta is o(delta^beta) at fixed t
    m = AlphaModel(a)
    deltas = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    rel = np.abs(increment_variance_exact(m, 1.0, deltas) / (m.c_qv * deltas**m.beta) - 1)
    assert np.all(np.diff(rel) < 0)
    assert rel[-1] < 1e-3


@pytest.mark.parametrize("a,t,s,d", [(1.5, 0.5, 0.25, 0.1), (2.0, 1.0, 0.5, 0.05), (1.25, 2.0, 0.0, 0.3)])
def test_cross_matches_four_term_oracle(a, t, s, d):
    m = AlphaModel(a)
    assert increment_cross(m, t, s, d) == pytest.approx(increment_cov_difference(m, t, s, d), rel=1e-12, abs=1e-15)


@given(alphas, st.floats(0.0, 3.0), st.floats(1e-3, 3.0), st.floats(1e-4, 1.0))
def test_cross_identity_and_cauchy_schwarz(a, s, gap, frac):
    m = AlphaModel(a)
    t = s + gap
    d = frac * gap
    c = increment_cross(m, t, s, d)
    assert c == pytest.approx(increment_cov_difference(m, t, s, d), rel=1e-8, abs=1e-12)
    bound = math.sqrt(increment_variance_exact(m, t, d) * increment_variance_exact(m, s, d))
    assert abs(c) <= bound * (1 + 1e-9)


def test_cross_large_lag_routes_through_difference():
    m = AlphaModel(1.5)
    assert increment_cross(m, 0.5, 0.25, 0.4) == pytest.approx(increment_cov_difference(m, 0.5, 0.25, 0.4))


def test_cross_vanishes_as_delta_shrinks():
    m = AlphaModel(1.5)
    vals = [abs(increment_cross(m, 1.0, 0.5, d)) for d in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6


@pytest.mark.parametrize("args", [(0.5, 0.5, 0.1), (0.25, 0.5, 0.1), (0.5, 0.25, 0.0), (0.5, -0.1, 0.1)])
def test_cross_domain(args):
    with pytest.raises(DomainError):
        increment_cross(AlphaModel(1.5), *args)


def test_pair_second_moment_diagonal_and_fourth_moment():
    m = AlphaModel(1.5)
    v = increment_variance_exact(m, 0.5, 0.05)
    assert pair_second_moment(m, 0.5, 0.5, 0.05) == pytest.approx(3 * v * v)
    assert increment_fourth_moment(m, 0.5, 0.05) == 3 * v * v


def test_pair_second_moment_monte_carlo():
    m = AlphaModel(1.5)
    t, s, d = 0.75, 0.25, 0.05
    vt, vs = increment_variance_exact(m, t, d), increment_variance_exact(m, s, d)
    c = increment_cross(m, t, s, d)
    rng = np.random.default_rng(11)
    xy = rng.multivariate_normal([0, 0], [[vt, c], [c, vs]], size=10**6)
    prod = xy[:, 0] ** 2 * xy[:, 1] ** 2
    se = prod.std() / math.sqrt(prod.size)
    assert abs(prod.mean() - pair_second_moment(m, t, s, d)) < 3 * se
    assert pair_second_moment(m, s, t, d) == pytest.approx(pair_second_moment(m, t, s, d))


def test_qv_limit_values():
    assert qv_limit_linear(AlphaModel(2.0), TimeGrid(0, 1, 4)) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-13)
    m = AlphaModel(1.5)
    base = qv_limit_linear(m, TimeGrid(0, 1, 4))
    assert base == pytest.approx(2 * sp_gamma(2 / 3) / math.pi, rel=1e-13)
    assert qv_limit_linear(m, TimeGrid(1, 5, 4)) == pytest.approx(base * 4 ** (1 / 3), rel=1e-13)


@pytest.mark.parametrize("a", [1.25, 1.5, 1.75])
def test_expected_weighted_qv_converges(a):
    m = AlphaModel(a)
    errs = [abs(expected_weighted_qv(m, TimeGrid(0, 1, n)) / m.c_qv - 1) for n in (64, 512, 4096)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


@pytest.mark.parametrize("a", [1.25, 1.5, 1.75])
def test_variance_matches_kernel_quadrature(a):
    m = AlphaModel(a)
    for t in (0.5, 2.0):
        assert variance_by_quadrature(m, t) == pytest.approx(cov_linear(m, t, t), rel=1e-4)
