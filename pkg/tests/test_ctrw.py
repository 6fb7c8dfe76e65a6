import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate, stats

from oracles import increment_density_at_zero, stratified_increment_density
from tmaxbayes import ctrw
from tmaxbayes.ctrw import (
    GLOBALS,
    CtrwParams,
    CtrwPriors,
    augmented_loglik_terms,
    log_joint,
    marginal_increment_logpdf,
    pointwise_loglik,
    predict_one_step,
    simulate,
    wait_bracket,
)
from tmaxbayes.exceptions import QuadratureError, ShapeError
from tmaxbayes.mcmc import McmcConfig, PosteriorDraws
from tmaxbayes.series import increments, series_from_arrays

TRUTH = CtrwParams(0.05, 0.1, 2.0, 2.0)


def fixed_draws(rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return PosteriorDraws(list(GLOBALS), rows[None, :, :], ["identity", "log", "log", "log"])


def test_log_joint_hand_value():
    value = log_joint(CtrwParams(0.0, 1.0, 1.0, 1.0), [1.0], [0.0])
    assert_allclose(value, -0.5 * math.log(2 * math.pi) - 1.0, rtol=0, atol=1e-12)
    assert_allclose(value, -0.9189385 - 1, atol=1e-7)


def test_log_joint_includes_priors():
    p = CtrwParams(0.1, 0.5, 2.0, 3.0)
    priors = CtrwPriors()
    assert_allclose(log_joint(p, [1.0, 2.0], [0.1, 0.2], priors) - log_joint(p, [1.0, 2.0], [0.1, 0.2]), priors.logpdf(0.1, 0.5, 2.0, 3.0))


def test_normal_term_invariant_under_joint_scaling():
    p = CtrwParams(0.1, 0.3, 2.0, 1.5)
    w = np.array([0.5, 1.2, 2.0])
    d = np.array([0.05, -0.2, 0.4])
    c = 3.7
    term = lambda ww, dd: stats.norm.logpdf(dd / ww, p.mu, p.tau)
    assert_allclose(term(c * w, c * d), term(w, d), rtol=1e-13)
    # only the Jacobian and gamma parts move
    full = augmented_loglik_terms(p, c * w, c * d) - augmented_loglik_terms(p, w, d)
    moved = -np.log(c) + stats.gamma.logpdf(c * w, p.alpha, scale=1 / p.beta) - stats.gamma.logpdf(w, p.alpha, scale=1 / p.beta)
    assert_allclose(full, moved, rtol=1e-12)


def test_nonpositive_wait_is_minus_inf():
    assert log_joint(TRUTH, [1.0, 0.0], [0.1, 0.1]) == -math.inf
    assert log_joint(TRUTH, [1.0, -2.0], [0.1, 0.1]) == -math.inf


def test_log_joint_shape_mismatch():
    with pytest.raises(ShapeError):
        log_joint(TRUTH, [1.0], [0.1, 0.2])


def test_params_validation():
    with pytest.raises(ValueError):
        CtrwParams(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        CtrwParams(0.0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        CtrwParams(float("nan"), 1.0, 1.0, 1.0)


@pytest.mark.parametrize("d", [0.1, 0.5, 2.0])
def test_marginal_symmetric_when_mu_zero(d):
    p = CtrwParams(0.0, 0.7, 1.5, 0.8)
    assert abs(marginal_increment_logpdf(d, p) - marginal_increment_logpdf(-d, p)) < 1e-10


@pytest.mark.parametrize("params", [TRUTH, CtrwParams(0.0, 1.0, 3.0, 1.0), CtrwParams(-0.2, 0.4, 5.0, 4.0)])
def test_marginal_total_mass(params):
    sd = math.sqrt(params.var_increment)
    f = lambda x: math.exp(marginal_increment_logpdf(x, params))
    lo, hi = params.mean_increment - 60 * sd, params.mean_increment + 60 * sd
    mass, _ = integrate.quad(f, lo, hi, points=[0.0], limit=400)
    assert abs(mass - 1.0) < 5e-4


def test_marginal_matches_monte_carlo_points():
    d = np.array([-0.3, 0.3])
    mc = stratified_increment_density(d, 0.05, 0.1, 2.0, 2.0)
    assert_allclose(np.exp(marginal_increment_logpdf(d, TRUTH)), mc, atol=5e-3)


def test_marginal_at_zero_exact():
    exact = increment_density_at_zero(0.05, 0.1, 2.0, 2.0)
    assert_allclose(math.exp(marginal_increment_logpdf(0.0, TRUTH)), exact, atol=5e-3)


def test_augmented_average_converges_to_marginal():
    rng = np.random.default_rng(0)
    w = rng.gamma(TRUTH.alpha, 1 / TRUTH.beta, size=1_000_000)
    for d in (0.1, 0.3, -0.2):
        lik = stats.norm.logpdf(d / w, TRUTH.mu, TRUTH.tau) - np.log(w)
        mc = np.mean(np.exp(lik))
        exact = math.exp(marginal_increment_logpdf(d, TRUTH))
        assert abs(mc / exact - 1) < 0.02


@pytest.mark.parametrize("params", [TRUTH, CtrwParams(0.0, 1.0, 1.0, 1.0), CtrwParams(-0.1, 0.2, 8.0, 1.0)])
def test_quadrature_node_doubling(params):
    sd = math.sqrt(params.var_increment)
    d = params.mean_increment + np.linspace(-4 * sd, 4 * sd, 41)
    assert np.max(np.abs(marginal_increment_logpdf(d, params, 401) - marginal_increment_logpdf(d, params, 801))) < 1e-6


def test_quadrature_bad_bracket():
    with pytest.raises(QuadratureError):
        wait_bracket(1e-300, 1.0)


def test_quadrature_nodes_must_be_odd():
    with pytest.raises(ValueError):
        marginal_increment_logpdf(0.1, TRUTH, nodes=400)


# -- simulation --------------------------------------------------------------------


def test_simulate_shape_and_determinism():
    a = simulate(TRUTH, 34.0, 500, seed=7)
    assert a.shape == (500,) and a[0] == 34.0
    assert_array_equal(a, simulate(TRUTH, 34.0, 500, seed=7))
    assert not np.array_equal(a, simulate(TRUTH, 34.0, 500, seed=8))


@pytest.mark.parametrize("alpha,beta", [(0.5, 3.0), (2.0, 2.0), (9.0, 0.5)])
def test_simulate_tau_limit_increasing(alpha, beta):
    path = simulate(CtrwParams(1.0, 1e-12, alpha, beta), 0.0, 200, seed=1)
    assert np.all(np.diff(path) > 0)


@pytest.fixture(scope="module")
def big_increments():
    return np.diff(simulate(TRUTH, 0.0, 1_000_001, seed=123))


def test_simulated_mean(big_increments):
    d = big_increments
    se = d.std(ddof=1) / math.sqrt(len(d))
    assert abs(d.mean() - TRUTH.mean_increment) < 3 * se
    assert TRUTH.mean_increment == 0.05


def test_simulated_variance(big_increments):
    expected = (0.05**2 + 0.1**2) * 2 * 3 / 4 - (0.05 * 2 / 2) ** 2
    assert_allclose(TRUTH.var_increment, expected)
    assert abs(big_increments.var(ddof=1) / expected - 1) < 0.02


def test_location_equivariance():
    a = simulate(TRUTH, 10.0, 300, seed=4)
    b = simulate(TRUTH, 12.5, 300, seed=4)
    assert_allclose(b - a, 2.5, rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    st.floats(-5, 5),
    st.floats(1e-3, 5),
    st.floats(0.05, 20),
    st.floats(0.05, 20),
    st.integers(0, 2**32),
)
def test_simulation_finite(mu, tau, alpha, beta, seed):
    assert np.all(np.isfinite(simulate(CtrwParams(mu, tau, alpha, beta), 0.0, 10_000, seed)))


def test_simulation_finite_long():
    assert np.all(np.isfinite(simulate(CtrwParams(0.1, 2.0, 0.3, 0.2), 0.0, 1_000_001, seed=9)))


# -- fitting -----------------------------------------------------------------------------


def test_constant_series_mu_near_zero():
    cfg = McmcConfig(chains=2, iterations=3000, burn_in=1000, thin=2, seed=1, init_jitter=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        draws = ctrw.fit(np.full(30, 34.0), config=cfg)
    mu = draws.flat(["mu"]).ravel()
    assert abs(mu.mean()) < mu.std()


def test_zero_increment_warns(short_config):
    y = np.array([30.0, 30.5, 30.5, 30.2, 30.9, 31.0])
    with pytest.warns(RuntimeWarning, match="zero increment"):
        ctrw.fit(y, config=short_config)


def test_fit_outputs(short_config):
    y = simulate(TRUTH, 30.0, 40, seed=2)
    draws = ctrw.fit(y, config=short_config)
    assert draws.names == list(GLOBALS)
    assert draws.samples.shape == (2, 200, 4)
    assert np.all(draws.flat(["tau", "alpha", "beta"]) > 0)
    with_latents = ctrw.fit(y, config=short_config, export_latents=True)
    assert with_latents.names[4:] == [f"w[{i}]" for i in range(1, 40)]
    assert_array_equal(with_latents.samples[:, :, :4], draws.samples)


def test_fix_mean_wait(short_config):
    draws = ctrw.fit(simulate(TRUTH, 30.0, 40, seed=2), config=short_config, fix_mean_wait=True)
    assert_array_equal(draws.param("alpha"), draws.param("beta"))


# -- prediction and likelihood ---------------------------------------------------------


def _series(y):
    return series_from_arrays(np.arange(1901, 1901 + len(y)), y)


def test_predict_zero_mu_gives_lagged_series():
    y = simulate(TRUTH, 30.0, 25, seed=3)
    fit = predict_one_step(fixed_draws([[0.0, 0.1, 2.0, 2.0]] * 10), _series(y))
    assert fit.fit_mean[0] == y[0]
    assert_array_equal(fit.fit_mean[1:], y[:-1])


def test_predict_positive_mu_above_previous():
    y = simulate(TRUTH, 30.0, 25, seed=3)
    fit = predict_one_step(fixed_draws([[0.2, 0.1, 2.0, 2.0], [0.1, 0.3, 1.0, 4.0]]), _series(y))
    assert np.all(fit.fit_mean[1:] > y[:-1])
    assert np.all(fit.lo95 <= fit.fit_mean) and np.all(fit.fit_mean <= fit.hi95)


def test_predictive_band_calibration():
    y = simulate(TRUTH, 30.0, 501, seed=21)
    fit = predict_one_step(fixed_draws([[0.05, 0.1, 2.0, 2.0]] * 200), _series(y), seed=5)
    inside = (y[1:] >= fit.lo95[1:]) & (y[1:] <= fit.hi95[1:])
    assert abs(inside.mean() - 0.95) <= 0.05


def test_fitted_frame_columns():
    y = simulate(TRUTH, 30.0, 10, seed=3)
    frame = predict_one_step(fixed_draws([TRUTH.mu, TRUTH.tau, TRUTH.alpha, TRUTH.beta]), _series(y)).to_frame()
    assert list(frame.columns) == ["year", "observed", "fit_mean", "lo95", "hi95"]
    assert len(frame) == 10


def test_pointwise_single_draw_matches_direct():
    ll = pointwise_loglik(fixed_draws([0.05, 0.1, 2.0, 2.0]), [0.12])
    assert ll.shape == (1, 1)
    assert ll[0, 0] == marginal_increment_logpdf(np.array([0.12]), TRUTH)[0]


def test_pointwise_identical_rows():
    ll = pointwise_loglik(fixed_draws([[0.05, 0.1, 2.0, 2.0]] * 5), [0.1, -0.2, 0.3])
    assert ll.shape == (5, 3)
    assert np.all(ll == ll[0])


def test_likelihood_ordering():
    wins = 0
    for rep in range(100):
        d = np.diff(simulate(TRUTH, 0.0, 117, seed=1000 + rep))
        true_row = pointwise_loglik(fixed_draws([0.05, 0.1, 2.0, 2.0]), d).sum()
        far_row = pointwise_loglik(fixed_draws([1.05, 0.1, 2.0, 2.0]), d).sum()
        wins += true_row > far_row
    assert wins >= 99


def test_pointwise_loglik_accepts_increment_series():
    y = simulate(TRUTH, 30.0, 12, seed=3)
    a = pointwise_loglik(fixed_draws([0.05, 0.1, 2.0, 2.0]), increments(y))
    b = pointwise_loglik(fixed_draws([0.05, 0.1, 2.0, 2.0]), np.diff(y))
    assert_array_equal(a, b)
