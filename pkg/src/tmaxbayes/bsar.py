"""Partially linear regression with a monotone spectral trend.

The model for an observation at standardised year ``x`` and unit time
``t`` is ``y = beta0 + beta1 * x + f(t) + eps`` with

    f(t) = gamma^2 * (int_0^t Z(s)^2 ds - int_0^1 int_0^u Z(s)^2 ds du),
    Z(s) = sum_j theta_j phi_j(s),  phi_0 = 1,  phi_j = sqrt(2) cos(pi j s).

Because ``f' = gamma^2 Z^2 >= 0`` every draw of ``f`` is non-decreasing,
and the second term centres ``f`` so it integrates to zero on [0, 1].
Both integrals reduce to quadratic forms in ``theta`` whose matrices have
closed trigonometric forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .ctrw import FittedSeries, _check_years_values
from .exceptions import ShapeError, ValidationError
from .mcmc import Block, GroupMove, McmcConfig, PosteriorDraws, TargetDensity, run_chains
from .series import NormalizedSeries, series_from_arrays

_LOG_2PI = math.log(2 * math.pi)
SCALARS = ("beta0", "beta1", "sigma", "gamma", "psi")


def basis_values(J: int, x) -> np.ndarray:
    """``phi_j(x)`` for ``j = 0..J``; shape ``x.shape + (J + 1,)``."""
    x = np.asarray(x, dtype=float)
    j = np.arange(J + 1)
    out = math.sqrt(2.0) * np.cos(np.pi * j * x[..., None])
    out[..., 0] = 1.0
    return out


def cross_integrals(J: int, x) -> np.ndarray:
    """``A_jk(x) = int_0^x phi_j phi_k``; shape ``x.shape + (J + 1, J + 1)``."""
    x = np.asarray(x, dtype=float)[..., None, None]
    j = np.arange(J + 1)[:, None]
    k = np.arange(J + 1)[None, :]
    diff = j - k
    tot = j + k
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(diff != 0, np.sin(np.pi * diff * x) / (np.pi * diff), x) + np.where(
            tot != 0, np.sin(np.pi * tot * x) / (np.pi * tot), x
        )
        edge = math.sqrt(2.0) * np.sin(np.pi * np.maximum(j, k) * x) / (np.pi * np.maximum(j, k))
    first = (j == 0) | (k == 0)
    a = np.where(first, edge, a)
    a = np.where((j == 0) & (k == 0), x, a)
    return a


def mean_cross_integrals(J: int) -> np.ndarray:
    """``int_0^1 A_jk(x) dx``."""
    j = np.arange(J + 1)[:, None].astype(float)
    k = np.arange(J + 1)[None, :].astype(float)

    def g(m):
        # int_0^1 sin(pi m x) / (pi m) dx, with the m = 0 limit int_0^1 x dx
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m != 0, (1 - np.cos(np.pi * m)) / (np.pi * m) ** 2, 0.5)

    out = g(j - k) + g(j + k)
    m = np.maximum(j, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        edge = math.sqrt(2.0) * (1 - np.cos(np.pi * m)) / (np.pi * m) ** 2
    out = np.where((j == 0) | (k == 0), edge, out)
    out[0, 0] = 0.5
    return out


@dataclass(frozen=True, eq=False)
class BasisSet:
    J: int
    times: np.ndarray
    phi: np.ndarray
    A: np.ndarray
    A_bar: np.ndarray

    @property
    def centered(self) -> np.ndarray:
        return self.A - self.A_bar


def build_basis(J: int, times) -> BasisSet:
    if J < 1:
        raise ValueError("J must be >= 1")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0) or np.any(times > 1):
        raise ValueError("times must be a 1-D array inside [0, 1]")
    arrays = [times, basis_values(J, times), cross_integrals(J, times), mean_cross_integrals(J)]
    for a in arrays:
        a.setflags(write=False)
    return BasisSet(J, *arrays)


@dataclass(frozen=True)
class BsarState:
    beta0: float
    beta1: float
    sigma: float
    gamma: float
    theta: np.ndarray
    psi: float

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.beta0, self.beta1, self.sigma, self.gamma, self.psi], np.asarray(self.theta, float)])

    @classmethod
    def from_vector(cls, v) -> "BsarState":
        v = np.asarray(v, dtype=float)
        return cls(beta0=v[0], beta1=v[1], sigma=v[2], gamma=v[3], psi=v[4], theta=v[5:])


@dataclass(frozen=True)
class BsarPriors:
    beta_sd: float = 100.0
    sigma_scale: float = 5.0
    gamma_scale: float = 2.0
    psi_rate: float = 0.5

    def logpdf(self, beta0, beta1, sigma, gamma, psi, theta) -> float:
        if sigma <= 0 or gamma <= 0 or psi <= 0:
            return -math.inf
        j = np.arange(len(theta))
        # theta_j ~ N(0, exp(-j psi))
        theta_lp = float(np.sum(-0.5 * theta**2 * np.exp(j * psi) + 0.5 * j * psi)) - 0.5 * len(theta) * _LOG_2PI
        half = math.log(2.0) - 0.5 * _LOG_2PI
        return (
            -0.5 * (beta0**2 + beta1**2) / self.beta_sd**2
            - 2 * math.log(self.beta_sd)
            - _LOG_2PI
            + half
            - math.log(self.sigma_scale)
            - 0.5 * (sigma / self.sigma_scale) ** 2
            + half
            - math.log(self.gamma_scale)
            - 0.5 * (gamma / self.gamma_scale) ** 2
            + math.log(self.psi_rate)
            - self.psi_rate * psi
            + theta_lp
        )


def eval_f(state: BsarState, basis: BasisSet, x=None) -> np.ndarray:
    """Trend ``f`` at the cached basis times, or at arbitrary ``x``."""
    theta = np.asarray(state.theta, dtype=float)
    if len(theta) != basis.J + 1:
        raise ShapeError(f"theta has {len(theta)} coefficients, basis expects {basis.J + 1}")
    mat = basis.centered if x is None else cross_integrals(basis.J, x) - basis.A_bar
    return state.gamma**2 * ((mat @ theta) @ theta)


def _curves(samples, x_std, centered):
    """Fitted curves ``(S, N)`` from flat parameter rows."""
    theta = samples[:, 5:]
    quad = np.einsum("sj,njk,sk->sn", theta, centered, theta, optimize=True)
    return samples[:, [0]] + samples[:, [1]] * x_std + samples[:, [3]] ** 2 * quad


def log_posterior(state: BsarState, data: NormalizedSeries, basis: BasisSet, priors: Optional[BsarPriors] = None) -> float:
    """Gaussian log likelihood plus log prior (constrained scale)."""
    priors = priors or BsarPriors()
    if len(data.y) != len(basis.times):
        raise ShapeError("series and basis grid differ in length")
    theta = np.asarray(state.theta, dtype=float)
    prior = priors.logpdf(state.beta0, state.beta1, state.sigma, state.gamma, state.psi, theta)
    if not math.isfinite(prior):
        return -math.inf
    mean = state.beta0 + state.beta1 * np.asarray(data.x_std) + eval_f(state, basis)
    r = (np.asarray(data.y) - mean) / state.sigma
    return prior + float(-0.5 * r @ r) - len(r) * (math.log(state.sigma) + 0.5 * _LOG_2PI)


class _TrendScaleMove(GroupMove):
    """``theta -> c theta``, ``gamma -> gamma / c``: leaves ``f`` unchanged."""

    name = "trend-scale"

    def __init__(self, n_theta, offset):
        self.n_theta = n_theta
        self.offset = offset

    def apply(self, z, eps):
        out = z.copy()
        out[self.offset :] *= math.exp(eps)
        out[self.offset - 2] -= eps
        return out, self.n_theta * eps


class _LinearPart:
    """Conjugate algebra for ``(beta0, beta1)`` given the residual ``y - f``."""

    def __init__(self, x, beta_sd):
        self.X = np.column_stack([np.ones(len(x)), x])
        self.XtX = self.X.T @ self.X
        self.prior_prec = np.eye(2) / beta_sd**2
        self.log_det_prior_prec = -4.0 * math.log(beta_sd)
        self.n = len(x)

    def posterior(self, r, sigma):
        prec = self.XtX / sigma**2 + self.prior_prec
        b = self.X.T @ r / sigma**2
        mean = np.linalg.solve(prec, b)
        return mean, prec, b

    def log_marginal(self, r, sigma):
        """``log int N(r; X beta, sigma^2) N(beta; 0, beta_sd^2) d beta``."""
        mean, prec, b = self.posterior(r, sigma)
        sign, log_det = np.linalg.slogdet(prec)
        return (
            -0.5 * self.n * (_LOG_2PI + 2 * math.log(sigma))
            + 0.5 * (self.log_det_prior_prec - log_det)
            - 0.5 * float(r @ r) / sigma**2
            + 0.5 * float(mean @ b)
        )


COLLAPSED = ("sigma", "gamma", "psi")


def build_target(
    series: NormalizedSeries, basis: BasisSet, priors: BsarPriors, theta_block: int = 5, elliptical: bool = True
) -> TargetDensity:
    """Posterior of ``sigma, gamma, psi`` and standardised coefficients ``eta``.

    The linear part is integrated out analytically. Coefficients are sampled
    non-centred, ``theta_j = exp(-j psi / 2) eta_j`` with ``eta_j ~ N(0, 1)``,
    which removes the funnel between ``psi`` and the high-order terms.
    """
    K = basis.J + 1
    if len(series.y) != len(basis.times):
        raise ShapeError("series and basis grid differ in length")
    names = list(COLLAPSED) + [f"eta[{j}]" for j in range(K)]
    transforms = ["log", "log", "log"] + ["identity"] * K
    y = np.asarray(series.y, dtype=float)
    linear = _LinearPart(np.asarray(series.x_std, dtype=float), priors.beta_sd)
    centered = np.ascontiguousarray(basis.centered)
    half_j = 0.5 * np.arange(K)
    half = math.log(2.0) - 0.5 * _LOG_2PI
    const = 2 * half - math.log(priors.sigma_scale) - math.log(priors.gamma_scale) + math.log(priors.psi_rate) - 0.5 * K * _LOG_2PI

    def log_density(v):
        sigma, gamma, psi = v[0], v[1], v[2]
        eta = v[3:]
        theta = eta * np.exp(-half_j * psi)
        f = gamma * gamma * ((centered @ theta) @ theta)
        prior = (
            const
            - 0.5 * (sigma / priors.sigma_scale) ** 2
            - 0.5 * (gamma / priors.gamma_scale) ** 2
            - priors.psi_rate * psi
            - 0.5 * float(eta @ eta)
        )
        return prior + linear.log_marginal(y - f, sigma)

    blocks = [Block((0,), name="sigma"), Block((1,), name="gamma"), Block((2,), name="psi")]
    if elliptical:
        blocks.append(Block(tuple(range(3, 3 + K)), name="eta", elliptical=True))
    else:
        for start in range(0, K, theta_block):
            idx = tuple(range(3 + start, 3 + min(K, start + theta_block)))
            blocks.append(Block(idx, name=f"eta[{start}:{start + len(idx)}]"))
    return TargetDensity(names, log_density, blocks, transforms, moves=(_TrendScaleMove(K, 3),))


def _eta_to_theta(draws: PosteriorDraws) -> PosteriorDraws:
    cols = [i for i, n in enumerate(draws.names) if n.startswith("eta[")]
    psi = draws.samples[:, :, draws.index("psi")]
    j = np.arange(len(cols))
    samples = draws.samples.copy()
    samples[:, :, cols] = draws.samples[:, :, cols] * np.exp(-0.5 * j * psi[:, :, None])
    draws.samples = samples
    draws.names = [n.replace("eta[", "theta[") for n in draws.names]
    return draws


def draw_linear(draws: PosteriorDraws, series: NormalizedSeries, basis: BasisSet, priors: BsarPriors, seed: int) -> PosteriorDraws:
    """Add exact conditional draws of ``beta0, beta1`` to collapsed draws."""
    linear = _LinearPart(np.asarray(series.x_std, dtype=float), priors.beta_sd)
    y = np.asarray(series.y, dtype=float)
    theta_cols = [draws.index(f"theta[{j}]") for j in range(basis.J + 1)]
    C, S = draws.n_chains, draws.n_draws
    betas = np.empty((C, S, 2))
    for c in range(C):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(c, 1)))
        for s in range(S):
            row = draws.samples[c, s]
            sigma, gamma = row[draws.index("sigma")], row[draws.index("gamma")]
            theta = row[theta_cols]
            f = gamma * gamma * ((basis.centered @ theta) @ theta)
            mean, prec, _ = linear.posterior(y - f, sigma)
            L = np.linalg.cholesky(prec)
            betas[c, s] = mean + np.linalg.solve(L.T, rng.standard_normal(2))
    samples = np.concatenate([betas, draws.samples], axis=2)
    draws.names = ["beta0", "beta1"] + list(draws.names)
    draws.samples = samples
    draws.transforms = ["identity", "identity"] + list(draws.transforms)
    return draws


def initial_point(series: NormalizedSeries, J: int) -> np.ndarray:
    X = np.column_stack([np.ones(len(series.y)), series.x_std])
    coef, *_ = np.linalg.lstsq(X, series.y, rcond=None)
    resid = series.y - X @ coef
    sigma = max(float(np.std(resid, ddof=2)) if len(resid) > 2 else 0.0, 1e-3)
    theta = np.zeros(J + 1)
    theta[0] = 0.3
    return np.concatenate([[sigma, 1.0, 1.0], theta])


def canonical_sign(draws: PosteriorDraws) -> PosteriorDraws:
    """Resolve the ``theta -> -theta`` symmetry of the posterior.

    ``f`` depends on ``theta`` only through ``Z^2``, so each draw is flipped
    to make the coefficient with the largest mean magnitude non-negative.
    """
    cols = [i for i, n in enumerate(draws.names) if n.startswith("theta[")]
    if not cols:
        return draws
    theta = draws.samples[:, :, cols]
    ref = int(np.argmax(np.mean(np.abs(theta), axis=(0, 1))))
    sign = np.where(theta[:, :, ref] < 0, -1.0, 1.0)
    samples = draws.samples.copy()
    samples[:, :, cols] = theta * sign[:, :, None]
    draws.samples = samples
    return draws


def fit(
    series: NormalizedSeries,
    config: Optional[McmcConfig] = None,
    J: int = 20,
    priors: Optional[BsarPriors] = None,
    *,
    n_jobs: int = 1,
) -> PosteriorDraws:
    """Sample ``beta0, beta1, sigma, gamma, psi, theta[0..J]``.

    The linear coefficients are integrated out while sampling and drawn
    exactly from their Gaussian conditional for each retained draw.
    """
    if len(series.y) < 5:
        raise ValidationError("need at least 5 observations to fit the BSAR model")
    config = config or McmcConfig()
    priors = priors or BsarPriors()
    basis = build_basis(J, series.t)
    target = build_target(series, basis, priors)
    draws = _eta_to_theta(run_chains(target, initial_point(series, J), config, n_jobs=n_jobs))
    draws = draw_linear(draws, series, basis, priors, config.seed)
    return canonical_sign(draws)


def curve_draws(draws: PosteriorDraws, series: NormalizedSeries, basis: BasisSet) -> np.ndarray:
    """``(S, N)`` fitted curves ``beta0 + beta1 x + f(t)``."""
    return _curves(draws.flat(), np.asarray(series.x_std), basis.centered)


def trend_draws(draws: PosteriorDraws, basis: BasisSet, x=None) -> np.ndarray:
    """``(S, len(x))`` draws of the monotone component alone."""
    rows = draws.flat()
    mat = basis.centered if x is None else cross_integrals(basis.J, x) - basis.A_bar
    theta = rows[:, 5:]
    return rows[:, [3]] ** 2 * np.einsum("sj,njk,sk->sn", theta, mat, theta, optimize=True)


def predict(
    draws: PosteriorDraws,
    series: NormalizedSeries,
    basis: BasisSet,
    band: str = "trend",
    seed: int = 0,
) -> FittedSeries:
    """Posterior mean curve with a 95% band.

    ``band="trend"`` gives the credible band of the curve itself;
    ``band="predictive"`` adds observation noise to every draw.
    """
    if band not in ("trend", "predictive"):
        raise ValueError("band must be 'trend' or 'predictive'")
    curves = curve_draws(draws, series, basis)
    if curves.shape[0] == 0:
        raise ValidationError("no posterior draws")
    mean = curves.mean(axis=0)
    spread = curves
    if band == "predictive":
        sigma = draws.flat(["sigma"])
        spread = curves + sigma * np.random.default_rng(seed).standard_normal(curves.shape)
    lo, hi = np.quantile(spread, [0.025, 0.975], axis=0)
    return FittedSeries(np.asarray(series.years), np.asarray(series.y, dtype=float), mean, lo, hi)


def pointwise_loglik(draws: PosteriorDraws, series: NormalizedSeries, basis: BasisSet) -> np.ndarray:
    """``(draws, observations)`` matrix of Gaussian log densities."""
    curves = curve_draws(draws, series, basis)
    sigma = draws.flat(["sigma"])
    r = (np.asarray(series.y)[None, :] - curves) / sigma
    return -0.5 * r * r - np.log(sigma) - 0.5 * _LOG_2PI


def loglik_at_mean(
    draws: PosteriorDraws, series: NormalizedSeries, basis: BasisSet, plugin: str = "curve"
) -> np.ndarray:
    """Per-observation log-likelihood at a posterior point estimate.

    ``plugin="curve"`` (default) uses the posterior-mean fitted curve with
    sigma at its log-scale mean. ``plugin="parameters"`` plugs in every
    parameter at its unconstrained-scale mean; because f is quadratic in theta
    and the linear slope trades off against f, that point can sit far from
    every draw and yields a meaningless (negative) effective parameter count.
    """
    if plugin == "curve":
        mean = curve_draws(draws, series, basis).mean(axis=0)
        sigma = float(np.exp(np.mean(np.log(draws.flat(["sigma"])))))
    elif plugin == "parameters":
        point = draws.mean_point()
        state = BsarState.from_vector(np.array([point[n] for n in draws.names]))
        mean = state.beta0 + state.beta1 * np.asarray(series.x_std) + eval_f(state, basis)
        sigma = state.sigma
    else:
        raise ValueError("plugin must be 'curve' or 'parameters'")
    r = (np.asarray(series.y) - mean) / sigma
    return -0.5 * r * r - math.log(sigma) - 0.5 * _LOG_2PI


class IsotonicBSARRegressor(RegressorMixin, BaseEstimator):
    """Linear year effect plus a non-decreasing spectral trend.

    ``fit`` takes years as ``X`` and annual maxima as ``y``. ``predict``
    evaluates the posterior mean curve at any year; beyond the training
    range the trend keeps integrating ``gamma^2 Z^2`` and stays monotone.

    Parameters
    ----------
    basis_J : int
        Number of cosine terms after the constant.
    band : {"trend", "predictive"}
        Band stored in ``fitted_``.
    """

    def __init__(
        self,
        chains=4,
        iterations=10_000,
        burn_in=2_000,
        thin=10,
        random_state=0,
        basis_J=20,
        band="trend",
        priors=None,
        init_jitter=0.1,
        n_jobs=1,
    ):
        self.chains = chains
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state
        self.basis_J = basis_J
        self.band = band
        self.priors = priors
        self.init_jitter = init_jitter
        self.n_jobs = n_jobs

    def fit(self, X, y):
        years, values = _check_years_values(X, y)
        self.series_ = series_from_arrays(years, values)
        self.basis_ = build_basis(self.basis_J, self.series_.t)
        config = McmcConfig(
            chains=self.chains,
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=int(self.random_state),
            init_jitter=self.init_jitter,
        )
        self.draws_ = fit(self.series_, config, self.basis_J, self.priors, n_jobs=self.n_jobs)
        self.fitted_ = predict(self.draws_, self.series_, self.basis_, self.band, seed=int(self.random_state))
        return self

    def predict(self, X, return_band=False):
        check_is_fitted(self, "draws_")
        years = _check_years_values(X).astype(float)
        t = self.series_.time_of(years)
        if np.any(t < 0):
            raise ValidationError("cannot predict before the first training year")
        rows = self.draws_.flat()
        curves = rows[:, [0]] + rows[:, [1]] * self.series_.standardize(years) + trend_draws(self.draws_, self.basis_, t)
        mean = curves.mean(axis=0)
        if not return_band:
            return mean
        lo, hi = np.quantile(curves, [0.025, 0.975], axis=0)
        return mean, lo, hi

    def pointwise_loglik(self):
        check_is_fitted(self, "draws_")
        return pointwise_loglik(self.draws_, self.series_, self.basis_)

    def loglik_at_mean(self):
        check_is_fitted(self, "draws_")
        return loglik_at_mean(self.draws_, self.series_, self.basis_)


def trend_frame(draws: PosteriorDraws, series: NormalizedSeries, basis: BasisSet) -> pd.DataFrame:
    """Posterior mean of the monotone component per year."""
    f = trend_draws(draws, basis)
    return pd.DataFrame({"year": series.years, "trend": f.mean(axis=0)})
