import math

import mpmath as mp
import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings, strategies as st
from scipy import integrate

from treatreg import _kernels as K
from treatreg.priors import (G_CAP, ModelIndicator, ShrinkagePrior, local_eb_g, log_half_cauchy,
                             log_marginal_gprior, log_shrinkage_density)

coef = st.floats(-50, 50, allow_nan=False).filter(lambda b: abs(b) > 1e-6)
scale = st.floats(1e-3, 1e3)


def mp_shrinkage(beta, v, dps=50):
    with mp.workdps(dps):
        v = mp.mpf(v)
        return sum(mp.log(mp.log1p(4 * v**2 / mp.mpf(b) ** 2)) - mp.log(v) for b in beta)


# --- shrinkage density -------------------------------------------------------

@pytest.mark.parametrize("v", [0.01, 0.5, 1.0, 7.0])
def test_two_v_gives_log_log2(v):
    assert log_shrinkage_density([2 * v], v) == pytest.approx(math.log(math.log(2)) - math.log(v), rel=1e-13)


def test_high_precision_example():
    expected = float(mp_shrinkage([0.3, -1.2], 0.5))
    assert log_shrinkage_density(np.array([0.3, -1.2]), 0.5) == pytest.approx(expected, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("b,v", [(1e-200, 1.0), (1e-5, 1e3), (1e5, 1e-3), (1e150, 1e-100), (3.0, 1e-20)])
def test_extreme_arguments_match_high_precision(b, v):
    expected = float(mp_shrinkage([b], v, dps=80))
    assert log_shrinkage_density([b], v) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_zero_is_clamped():
    val = log_shrinkage_density([0.0, 1.0], 1.0)
    assert np.isfinite(val)
    assert val == log_shrinkage_density([1e-300, 1.0], 1.0)


def test_invalid_scale():
    with pytest.raises(ValueError):
        log_shrinkage_density([1.0], 0.0)
    with pytest.raises(ValueError):
        ShrinkagePrior(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(coef, min_size=1, max_size=6), scale)
def test_symmetry_and_kernel_agreement(beta, v):
    b = np.array(beta)
    val = log_shrinkage_density(b, v)
    assert val == log_shrinkage_density(-b, v)
    assert K.log_shrink(b, v) == pytest.approx(val, rel=1e-12, abs=1e-12)
    assert ShrinkagePrior(v).logpdf(b) == val


@settings(max_examples=200, deadline=None)
@given(st.lists(coef, min_size=1, max_size=6), scale, st.floats(1e-2, 1e2))
def test_scale_family(beta, v, c):
    # log pi(c b | c v) = log pi(b | v) - p log c
    b = np.array(beta)
    lhs = log_shrinkage_density(c * b, c * v)
    rhs = log_shrinkage_density(b, v) - b.size * math.log(c)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(coef, st.floats(1.001, 100), scale)
def test_decreasing_in_magnitude(b, factor, v):
    assert log_shrinkage_density([b * factor], v) < log_shrinkage_density([b], v)


# --- half-Cauchy -------------------------------------------------------------------

def test_half_cauchy_values():
    assert log_half_cauchy(1.0) == pytest.approx(math.log(1 / math.pi), rel=1e-15)
    assert log_half_cauchy(1e-12) == pytest.approx(math.log(2 / math.pi), rel=1e-15)
    assert log_half_cauchy(3.0) == pytest.approx(math.log(2 / (10 * math.pi)), rel=1e-15)
    total, _ = integrate.quad(lambda v: math.exp(log_half_cauchy(v)), 0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        log_half_cauchy(0.0)


# --- g-prior -------------------------------------------------------------------------

def test_empty_model_and_zero_g(rng):
    y = rng.normal(size=30)
    X = rng.normal(size=(30, 3))
    assert log_marginal_gprior(y, np.empty((30, 0)), 2.5) == 0.0
    for cols in ([0], [1, 2], [0, 1, 2]):
        assert log_marginal_gprior(y, X[:, cols], 0.0) == 0.0


def test_column_order_invariance(rng):
    y = rng.normal(size=40)
    X = rng.normal(size=(40, 3))
    a = log_marginal_gprior(y, X, 3.0)
    assert log_marginal_gprior(y, X[:, [2, 0, 1]], 3.0) == pytest.approx(a, rel=1e-12)


def test_gprior_quadrature_oracle():
    """Integrate mu, beta and sigma numerically for one regressor."""
    rng = np.random.default_rng(3)
    n, g = 30, 3.0
    x = rng.normal(size=n)
    y = 1.0 + 0.4 * x + rng.normal(size=n)
    xc, yc = x - x.mean(), y - y.mean()
    sxx = xc @ xc

    # mu integrates out analytically under its flat prior, leaving the
    # centered likelihood; beta | sigma ~ N(0, g sigma^2 / sxx); p(sigma) ∝ 1/sigma
    def log_lik(b, s):
        r = yc - b * xc
        return -(n - 1) * math.log(s) - 0.5 * (r @ r) / s**2

    def log_prior_b(b, s):
        var = g * s * s / sxx
        return -0.5 * math.log(2 * math.pi * var) - 0.5 * b * b / var

    b_hat = (xc @ yc) / sxx
    s_hat = math.sqrt(((yc - b_hat * xc) @ (yc - b_hat * xc)) / n)
    shift = log_lik(b_hat, s_hat)
    # integrate over log sigma (the 1/sigma prior cancels the Jacobian)
    num, _ = integrate.dblquad(
        lambda b, ls: math.exp(log_lik(b, math.exp(ls)) + log_prior_b(b, math.exp(ls)) - shift),
        math.log(s_hat) - 3, math.log(s_hat) + 3, b_hat - 3, b_hat + 3, epsabs=0, epsrel=1e-10)
    den, _ = integrate.quad(lambda ls: math.exp(-(n - 1) * ls - 0.5 * (yc @ yc) * math.exp(-2 * ls) - shift),
                            math.log(s_hat) - 3, math.log(s_hat) + 3, epsabs=0, epsrel=1e-12, limit=200)
    oracle = math.log(num) - math.log(den)
    assert log_marginal_gprior(y, x[:, None], g) == pytest.approx(oracle, abs=1e-6)


def test_gprior_base_columns_match_explicit_residualization(rng):
    n = 40
    base = rng.normal(size=(n, 1))
    X = rng.normal(size=(n, 2))
    y = X @ [0.5, 0.0] + 2 * base[:, 0] + rng.normal(size=n)
    # with a flat-prior base column, the score equals the score of the
    # base-residualized problem with one fewer degree of freedom
    val = log_marginal_gprior(y, X, 4.0, base=base)
    W = np.column_stack([np.ones(n), base])
    H = W @ np.linalg.pinv(W)
    ry, RX = y - H @ y, X - H @ X
    r2 = 1 - np.sum((ry - RX @ np.linalg.lstsq(RX, ry, rcond=None)[0]) ** 2) / (ry @ ry)
    N, k = n - 2, 2
    assert val == pytest.approx(0.5 * (N - k) * math.log(5) - 0.5 * N * math.log(1 + 4 * (1 - r2)), rel=1e-10)


def test_model_size_limit(rng):
    with pytest.raises(ValueError):
        log_marginal_gprior(rng.normal(size=5), rng.normal(size=(5, 4)), 1.0)
    with pytest.raises(ValueError):
        ModelIndicator(np.array([1, 1, 0, 1]), p_max=2)
    m = ModelIndicator(np.array([1, 0, 1]), p_max=3)
    assert m.size == 2 and m.log_prior() == 0.0


def test_local_eb_zero_r2(rng):
    n = 30
    x = rng.normal(size=n)
    y = rng.normal(size=n)
    xc = x - x.mean()
    y = y - xc * (xc @ y) / (xc @ xc)    # exactly orthogonal: R^2 = 0
    assert local_eb_g(y, x[:, None]) == 0.0


def test_local_eb_perfect_fit(rng):
    X = rng.normal(size=(30, 2))
    assert local_eb_g(X @ [1.0, -2.0] + 3.0, X) == G_CAP


def test_local_eb_known_f():
    rng = np.random.default_rng(11)
    n, k = 30, 2
    X = rng.normal(size=(n, k))
    W = np.column_stack([np.ones(n), X])
    fit = (X - X.mean(axis=0)) @ np.array([1.0, 0.5])
    e = rng.normal(size=n)
    e -= W @ np.linalg.lstsq(W, e, rcond=None)[0]
    # F = (SSR_fit / k) / (SSE / (n - k - 1)) = 5
    e *= math.sqrt((fit @ fit) * (n - k - 1) / (5.0 * k) / (e @ e))
    y = 2.0 + fit + e
    F = sm.OLS(y, sm.add_constant(X)).fit().fvalue
    assert F == pytest.approx(5.0, rel=1e-10)
    assert local_eb_g(y, X) == pytest.approx(4.0, rel=1e-9)


def test_local_eb_matches_statsmodels_f(rng):
    for _ in range(10):
        X = rng.normal(size=(30, 3))
        y = X @ rng.normal(size=3) + rng.normal(size=30)
        F = sm.OLS(y, sm.add_constant(X)).fit().fvalue
        assert local_eb_g(y, X) == pytest.approx(max(F - 1, 0), rel=1e-9)


def test_local_eb_maximizes_marginal():
    rng = np.random.default_rng(5)
    grid = np.concatenate([[0.0], np.logspace(-4, 6, 400)])
    for _ in range(100):
        n = int(rng.integers(15, 60))
        k = int(rng.integers(1, 4))
        X = rng.normal(size=(n, k))
        y = X @ rng.normal(scale=rng.uniform(0, 0.6), size=k) + rng.normal(size=n)
        g_star = local_eb_g(y, X)
        best = log_marginal_gprior(y, X, g_star)
        vals = np.array([log_marginal_gprior(y, X, g) for g in grid])
        assert best >= vals.max() - 1e-10
        for f in (0.99, 1.01):
            assert best >= log_marginal_gprior(y, X, g_star * f) - 1e-12
