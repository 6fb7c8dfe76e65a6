"""Coupled continuous-time random walk for annual maxima.

Each annual change is the product of a jump ``delta ~ N(mu, tau^2)`` and a
waiting time ``w ~ Gamma(alpha, rate=beta)``::

    T[i] = T[i-1] + delta[i] * w[i]

Only the product is observed. The posterior is explored with the waiting
times as latent variables (``delta[i] = D[i] / w[i]`` with Jacobian
``1 / w[i]``); the marginal density of an increment, needed for model
comparison, is obtained by integrating the waiting time out numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import gammainccinv, gammaincinv, gammaln, logsumexp
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import QuadratureError, ShapeError, ValidationError
from .mcmc import Block, GroupMove, McmcConfig, PosteriorDraws, TargetDensity, run_chains
from .series import IncrementSeries, NormalizedSeries, increments, series_from_arrays

_LOG_2PI = math.log(2 * math.pi)
GLOBALS = ("mu", "tau", "alpha", "beta")


@dataclass(frozen=True)
class CtrwParams:
    mu: float
    tau: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in GLOBALS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("tau", "alpha", "beta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mean_increment(self) -> float:
        return self.mu * self.alpha / self.beta

    @property
    def var_increment(self) -> float:
        a, b = self.alpha, self.beta
        return (self.mu**2 + self.tau**2) * a * (a + 1) / b**2 - (self.mu * a / b) ** 2


@dataclass(frozen=True)
class CtrwPriors:
    """Weakly informative priors on the degrees-C scale."""

    mu_mean: float = 0.0
    mu_sd: float = 10.0
    tau_scale: float = 5.0
    log_alpha_mean: float = 0.0
    log_alpha_sd: float = 1.5
    log_beta_mean: float = 0.0
    log_beta_sd: float = 1.5

    def __post_init__(self):
        for name in ("mu_sd", "tau_scale", "log_alpha_sd", "log_beta_sd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def logpdf(self, mu, tau, alpha, beta) -> float:
        """Prior log density on the constrained scale."""
        if tau <= 0 or alpha <= 0 or beta <= 0:
            return -math.inf
        la, lb = math.log(alpha), math.log(beta)
        return (
            _norm_logpdf(mu, self.mu_mean, self.mu_sd)
            + _norm_logpdf(tau, 0.0, self.tau_scale)
            + math.log(2.0)
            + _norm_logpdf(la, self.log_alpha_mean, self.log_alpha_sd)
            - la
            + _norm_logpdf(lb, self.log_beta_mean, self.log_beta_sd)
            - lb
        )


def _norm_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - 0.5 * _LOG_2PI


def _norm_logpdf_vec(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * _LOG_2PI


def _gamma_logpdf(w, alpha, beta):
    with np.errstate(divide="ignore", invalid="ignore"):
        return alpha * np.log(beta) - gammaln(alpha) + (alpha - 1) * np.log(w) - beta * w


def augmented_loglik_terms(params: CtrwParams, w, deltas) -> np.ndarray:
    """Per-increment log density of ``(D[i], w[i])``; ``-inf`` where ``w <= 0``."""
    w = np.asarray(w, dtype=float)
    d = np.asarray(getattr(deltas, "deltas", deltas), dtype=float)
    if w.shape != d.shape:
        raise ShapeError(f"latents have shape {w.shape} but increments have shape {d.shape}")
    out = np.full(w.shape, -np.inf)
    ok = w > 0
    wo = w[ok]
    out[ok] = (
        _norm_logpdf_vec(d[ok] / wo, params.mu, params.tau)
        - np.log(wo)
        + _gamma_logpdf(wo, params.alpha, params.beta)
    )
    return out


def log_joint(params: CtrwParams, latents, deltas, priors: Optional[CtrwPriors] = None) -> float:
    """Log joint density of increments, waiting times and parameters.

    Pass ``priors=None`` to get the likelihood part only.
    """
    terms = augmented_loglik_terms(params, latents, deltas)
    total = float(np.sum(terms))
    if priors is not None:
        total += priors.logpdf(params.mu, params.tau, params.alpha, params.beta)
    return total if not math.isnan(total) else -math.inf


# -- marginal density --------------------------------------------------------


def _simpson_log_weights(n):
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.log(w)


def wait_bracket(alpha, beta, tail=1e-10):
    """Gamma quantiles ``(q(tail), q(1 - tail))`` bounding the waiting time."""
    lo = gammaincinv(alpha, tail) / beta
    hi = gammainccinv(alpha, tail) / beta
    if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo < hi):
        raise QuadratureError(f"cannot bracket Gamma({alpha}, {beta}) quantiles: [{lo}, {hi}]")
    return float(lo), float(hi)


def marginal_increment_logpdf(delta, params: CtrwParams, nodes: int = 401) -> np.ndarray:
    """Log density of one increment with the waiting time integrated out.

    Composite Simpson's rule on ``nodes`` points, spaced evenly in ``log w``
    across the central ``1 - 2e-10`` mass of the waiting-time distribution,
    accumulated with log-sum-exp.
    """
    d = np.asarray(delta, dtype=float)
    lw = _simpson_log_weights(nodes)
    lo, hi = wait_bracket(params.alpha, params.beta)
    u = np.linspace(math.log(lo), math.log(hi), nodes)
    h = u[1] - u[0]
    w = np.exp(u)
    # (1/w) N(d/w) g(w) dw  ==  N(d/w) g(w) du
    log_g = _gamma_logpdf(w, params.alpha, params.beta)
    integrand = _norm_logpdf_vec(d[..., None] / w, params.mu, params.tau) + log_g
    out = logsumexp(integrand + lw, axis=-1) + math.log(h / 3.0)
    if not np.all(np.isfinite(out)):
        raise QuadratureError(f"non-finite marginal density for {params}")
    return out if out.ndim else float(out)


# -- simulation ----------------------------------------------------------------


def simulate(params: CtrwParams, t0: float, n: int, seed: int) -> np.ndarray:
    """Length-``n`` path starting at ``t0``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    delta = rng.normal(params.mu, params.tau, size=n - 1)
    w = rng.gamma(params.alpha, 1.0 / params.beta, size=n - 1)
    path = np.empty(n)
    path[0] = t0
    path[1:] = t0 + np.cumsum(delta * w)
    return path


# -- posterior sampling ------------------------------------------------------------


class _WaitScaleMove(GroupMove):
    """Rescale all waits by ``c = exp(eps)`` and compensate the jump law.

    ``w -> c w``, ``beta -> beta / c``, ``mu -> mu / c``, ``tau -> tau / c``
    leaves every ``delta * w`` unchanged; only the priors see the move.
    """

    name = "wait-scale"

    def __init__(self, n_latent):
        self.w_idx = slice(4, 4 + n_latent)

    def apply(self, z, eps):
        out = z.copy()
        out[self.w_idx] += eps
        out[1] -= eps
        out[3] -= eps
        shrink = math.exp(-eps)
        out[0] *= shrink
        return out, -eps


def build_target(deltas, priors: CtrwPriors, fix_mean_wait: bool = False) -> TargetDensity:
    """Posterior over the globals and waiting times as a :class:`TargetDensity`.

    With ``fix_mean_wait`` the rate is tied to the shape (unit mean wait) and
    ``beta`` is not a free parameter.
    """
    d = np.asarray(getattr(deltas, "deltas", deltas), dtype=float)
    m = len(d)
    k = 3 if fix_mean_wait else 4
    names = list(GLOBALS[:k]) + [f"w[{i + 1}]" for i in range(m)]
    transforms = ["identity"] + ["log"] * (k - 1 + m)

    def unpack(x):
        mu, tau, alpha = x[0], x[1], x[2]
        beta = alpha if fix_mean_wait else x[3]
        return mu, tau, alpha, beta

    def log_density(x):
        mu, tau, alpha, beta = unpack(x)
        w = x[k:]
        prior = priors.logpdf(mu, tau, alpha, beta)
        if not math.isfinite(prior):
            return -math.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            lik = (_norm_logpdf_vec(d / w, mu, tau) - np.log(w) + _gamma_logpdf(w, alpha, beta)).sum()
        return prior + lik if math.isfinite(lik) else -math.inf

    def conditional_terms(x, block):
        mu, tau, alpha, beta = unpack(x)
        w = x[k:]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = _norm_logpdf_vec(d / w, mu, tau) - np.log(w) + _gamma_logpdf(w, alpha, beta)
        return np.where(np.isnan(out), -np.inf, out)

    blocks = [Block((j,), name=GLOBALS[j]) for j in range(k)]
    blocks.append(Block(tuple(range(k, k + m)), name="waits", independent=True))
    moves = () if fix_mean_wait else (_WaitScaleMove(m),)
    return TargetDensity(names, log_density, blocks, transforms, conditional_terms, moves)


def initial_point(deltas, fix_mean_wait=False) -> np.ndarray:
    d = np.asarray(getattr(deltas, "deltas", deltas), dtype=float)
    sd = float(np.std(d, ddof=1)) if len(d) > 1 else 0.0
    tau = sd if sd > 0 else 0.1
    globals_ = [float(np.mean(d)), tau, 1.0] + ([] if fix_mean_wait else [1.0])
    return np.array(globals_ + [1.0] * len(d))


def fit(
    series,
    priors: Optional[CtrwPriors] = None,
    config: Optional[McmcConfig] = None,
    *,
    fix_mean_wait: bool = False,
    export_latents: bool = False,
    n_jobs: int = 1,
) -> PosteriorDraws:
    """Sample the CTRW posterior for a series (or its increments).

    Returned draws hold ``mu, tau, alpha, beta`` and, with
    ``export_latents``, the waiting times ``w[i]``.
    """
    priors = priors or CtrwPriors()
    config = config or McmcConfig()
    deltas = series if isinstance(series, IncrementSeries) else increments(series)
    if len(deltas) < 2:
        raise ValidationError("need at least 3 observations to fit the CTRW model")
    n_zero = int(np.sum(np.asarray(deltas.deltas) == 0.0))
    if n_zero:
        warnings.warn(
            f"{n_zero} zero increment(s): the increment density at 0 is unbounded when alpha <= 1, "
            "so waits and alpha may drift toward 0",
            RuntimeWarning,
            stacklevel=2,
        )
    target = build_target(deltas, priors, fix_mean_wait)
    draws = run_chains(target, initial_point(deltas, fix_mean_wait), config, n_jobs=n_jobs)
    if fix_mean_wait:
        alpha = draws.samples[:, :, 2:3]
        samples = np.concatenate([draws.samples[:, :, :3], alpha, draws.samples[:, :, 3:]], axis=2)
        draws = replace(
            draws,
            names=list(GLOBALS) + draws.names[3:],
            samples=samples,
            transforms=draws.transforms[:3] + ["log"] + draws.transforms[3:],
        )
    if not export_latents:
        draws = draws.subset(list(GLOBALS))
    return draws


def _param_rows(draws: PosteriorDraws) -> np.ndarray:
    return draws.flat(list(GLOBALS))


# -- prediction and pointwise likelihood -----------------------------------------


@dataclass
class FittedSeries:
    years: np.ndarray
    observed: np.ndarray
    fit_mean: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "year": self.years,
                "observed": self.observed,
                "fit_mean": self.fit_mean,
                "lo95": self.lo95,
                "hi95": self.hi95,
            }
        )


def predictive_increments(draws: PosteriorDraws, seed: int, per_draw: int = 20) -> np.ndarray:
    """Posterior predictive increments, ``per_draw`` for every retained draw."""
    rows = _param_rows(draws)
    rng = np.random.default_rng(seed)
    mu = np.repeat(rows[:, 0], per_draw)
    tau = np.repeat(rows[:, 1], per_draw)
    alpha = np.repeat(rows[:, 2], per_draw)
    beta = np.repeat(rows[:, 3], per_draw)
    delta = rng.normal(mu, tau)
    w = rng.gamma(alpha, 1.0 / beta)
    return delta * w


def predict_one_step(draws: PosteriorDraws, series: NormalizedSeries, seed: int = 0, per_draw: int = 20) -> FittedSeries:
    """One-step-ahead fit: each year predicted from the observed previous year.

    The first year has no predecessor and echoes the observation.
    """
    rows = _param_rows(draws)
    if len(rows) == 0:
        raise ValidationError("no posterior draws")
    y = np.asarray(series.y, dtype=float)
    mean_inc = float(np.mean(rows[:, 0] * rows[:, 2] / rows[:, 3]))
    sims = predictive_increments(draws, seed, per_draw)
    lo, hi = np.quantile(sims, [0.025, 0.975])
    fit_mean = y.copy()
    lo95 = y.copy()
    hi95 = y.copy()
    fit_mean[1:] = y[:-1] + mean_inc
    lo95[1:] = y[:-1] + lo
    hi95[1:] = y[:-1] + hi
    return FittedSeries(np.asarray(series.years), y, fit_mean, lo95, hi95)


def pointwise_loglik(draws: PosteriorDraws, deltas, nodes: int = 401) -> np.ndarray:
    """``(draws, increments)`` matrix of marginal log densities."""
    d = np.asarray(getattr(deltas, "deltas", deltas), dtype=float)
    rows = _param_rows(draws)
    out = np.empty((len(rows), len(d)))
    for s, row in enumerate(rows):
        try:
            out[s] = marginal_increment_logpdf(d, CtrwParams(*row), nodes)
        except QuadratureError as exc:
            raise QuadratureError(f"draw {s}: {exc}") from exc
    return out


def loglik_at_mean(draws: PosteriorDraws, deltas, nodes: int = 401) -> np.ndarray:
    """Per-increment log density at the posterior mean (unconstrained scale)."""
    point = draws.mean_point()
    params = CtrwParams(*(point[g] for g in GLOBALS))
    d = np.asarray(getattr(deltas, "deltas", deltas), dtype=float)
    return np.atleast_1d(marginal_increment_logpdf(d, params, nodes))


# -- estimator -------------------------------------------------------------------


def _check_years_values(X, y=None):
    X = np.asarray(X)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ShapeError("X must hold a single column of years")
        X = X[:, 0]
    if X.ndim != 1:
        raise ShapeError("X must be a 1-D array of years")
    if y is None:
        return X
    y = np.asarray(y, dtype=float)
    if y.shape != X.shape:
        raise ShapeError("X and y must have the same length")
    order = np.argsort(X, kind="stable")
    return X[order], y[order]


class CTRWRegressor(RegressorMixin, BaseEstimator):
    """Coupled CTRW fitted by adaptive Metropolis-within-Gibbs.

    ``fit`` takes years as ``X`` and annual maxima as ``y``. ``predict``
    returns one-step-ahead means for training years and mean-increment
    extrapolations for years after the last observation.

    Parameters
    ----------
    chains, iterations, burn_in, thin : int
        Chain protocol.
    random_state : int
        Master seed; also seeds predictive simulation.
    quad_nodes : int
        Simpson nodes for the marginal increment density.
    fix_mean_wait : bool
        Tie ``beta`` to ``alpha`` so waits have unit mean.
    n_predictive : int
        Predictive samples per retained draw for the credible band.
    priors : CtrwPriors, optional
    n_jobs : int
        Chains run in parallel when > 1; results do not depend on it.
    """

    def __init__(
        self,
        chains=4,
        iterations=10_000,
        burn_in=2_000,
        thin=10,
        random_state=0,
        quad_nodes=401,
        fix_mean_wait=False,
        n_predictive=20,
        priors=None,
        init_jitter=0.1,
        n_jobs=1,
    ):
        self.chains = chains
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state
        self.quad_nodes = quad_nodes
        self.fix_mean_wait = fix_mean_wait
        self.n_predictive = n_predictive
        self.priors = priors
        self.init_jitter = init_jitter
        self.n_jobs = n_jobs

    def _config(self):
        return McmcConfig(
            chains=self.chains,
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=int(self.random_state),
            init_jitter=self.init_jitter,
        )

    def fit(self, X, y):
        years, values = _check_years_values(X, y)
        self.series_ = series_from_arrays(years, values)
        self.increments_ = increments(self.series_)
        self.draws_ = fit(
            self.increments_,
            self.priors,
            self._config(),
            fix_mean_wait=self.fix_mean_wait,
            n_jobs=self.n_jobs,
        )
        self.fitted_ = predict_one_step(self.draws_, self.series_, seed=int(self.random_state), per_draw=self.n_predictive)
        rows = _param_rows(self.draws_)
        self.mean_increment_ = float(np.mean(rows[:, 0] * rows[:, 2] / rows[:, 3]))
        return self

    def predict(self, X, return_band=False):
        check_is_fitted(self, "draws_")
        years = _check_years_values(X).astype(np.int64)
        first, last = int(self.series_.years[0]), int(self.series_.years[-1])
        if np.any(years < first):
            raise ValidationError(f"cannot predict before the first training year {first}")
        pos = years - first
        inside = years <= last
        mean = np.empty(len(years))
        mean[inside] = self.fitted_.fit_mean[pos[inside]]
        mean[~inside] = self.series_.y[-1] + (years[~inside] - last) * self.mean_increment_
        if not return_band:
            return mean
        if np.any(~inside):
            raise ValidationError("bands are only available for training years")
        return mean, self.fitted_.lo95[pos], self.fitted_.hi95[pos]

    def pointwise_loglik(self):
        check_is_fitted(self, "draws_")
        return pointwise_loglik(self.draws_, self.increments_, self.quad_nodes)

    def loglik_at_mean(self):
        check_is_fitted(self, "draws_")
        return loglik_at_mean(self.draws_, self.increments_, self.quad_nodes)
