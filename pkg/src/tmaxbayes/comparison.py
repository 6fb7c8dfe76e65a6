"""Model comparison: DIC, PSIS-LOO, RMSE and MAE."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .exceptions import InsufficientDrawsError, ShapeError, ValidationError

PARETO_K_THRESHOLD = 0.7
MIN_DRAWS = 16
WARN_DRAWS = 100

COMPARE_COLUMNS = [
    "model",
    "dic",
    "p_d",
    "looic",
    "elpd",
    "se_elpd",
    "rmse",
    "mae",
    "n_pareto_k_gt_0.7",
    "fit_description",
]


def _matrix(loglik) -> np.ndarray:
    values = np.asarray(getattr(loglik, "values", loglik), dtype=float)
    if values.ndim != 2:
        raise ShapeError("log-likelihood must be a (draws, observations) matrix")
    if not np.all(np.isfinite(values)):
        raise ValidationError("log-likelihood matrix contains non-finite entries")
    return values


@dataclass
class LogLikMatrix:
    values: np.ndarray
    model: str = ""
    observations: Optional[Sequence] = None

    def __post_init__(self):
        self.values = _matrix(self.values)
        if self.observations is not None and len(self.observations) != self.values.shape[1]:
            raise ShapeError("one label per observation is required")


def dic(loglik, loglik_at_mean) -> tuple:
    """Deviance information criterion.

    Returns ``(dic, p_d)`` where ``p_d = mean deviance - deviance at the
    posterior mean`` and ``dic = deviance at the mean + 2 p_d``.
    """
    ll = _matrix(loglik)
    at_mean = np.asarray(loglik_at_mean, dtype=float)
    if at_mean.shape != (ll.shape[1],):
        raise ShapeError(f"loglik_at_mean must have shape ({ll.shape[1]},)")
    d_bar = float(np.mean(-2.0 * ll.sum(axis=1)))
    d_hat = float(-2.0 * at_mean.sum())
    p_d = d_bar - d_hat
    return d_hat + 2.0 * p_d, p_d


def gpd_fit(x) -> tuple:
    """Generalized Pareto ``(k, sigma)`` for exceedances ``x > 0``.

    Zhang and Stephens (2009) posterior-mean estimator with the usual
    weakly informative adjustment of ``k`` towards 0.5.
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    m = 30 + int(math.sqrt(n))
    prior_bs = 3.0
    b = 1.0 - np.sqrt(m / (np.arange(1, m + 1) - 0.5))
    b = b / (prior_bs * x[int(n / 4 + 0.5) - 1]) + 1.0 / x[-1]
    k = np.log1p(-b[:, None] * x).mean(axis=1)
    len_scale = n * (np.log(-(b / k)) - k - 1.0)
    with np.errstate(over="ignore"):
        # overflow means a negligible weight, which 1 / inf = 0 expresses
        weights = 1.0 / np.exp(len_scale - len_scale[:, None]).sum(axis=1)
    keep = weights >= 10 * np.finfo(float).eps
    weights = weights[keep] / weights[keep].sum()
    b_post = float(np.sum(b[keep] * weights))
    k_post = float(np.log1p(-b_post * x).mean())
    sigma = -k_post / b_post
    k_post = (n * k_post + 10 * 0.5) / (n + 10)
    return k_post, sigma


def _gpd_quantile(p, k, sigma):
    if k == 0:
        return -sigma * np.log1p(-p)
    return sigma * np.expm1(-k * np.log1p(-p)) / k


def psis_smooth(log_ratios) -> tuple:
    """Pareto-smooth one vector of log importance ratios.

    Returns ``(log_weights, k_hat, degenerate)``; weights are unnormalised.
    """
    lw = np.asarray(log_ratios, dtype=float)
    S = len(lw)
    lw = lw - lw.max()
    tail_len = int(math.ceil(min(0.2 * S, 3.0 * math.sqrt(S))))
    order = np.argsort(lw, kind="stable")
    cutoff_idx = S - tail_len - 1
    if tail_len < 5 or cutoff_idx < 0:
        return lw, math.inf, True
    cutoff = lw[order[cutoff_idx]]
    tail = order[cutoff_idx + 1 :]
    tail_vals = lw[tail]
    exp_cut = math.exp(cutoff)
    exceed = np.exp(tail_vals) - exp_cut
    if np.all(exceed <= 0) or np.ptp(exceed) == 0:
        return lw, 0.0, bool(np.ptp(lw) == 0)
    k, sigma = gpd_fit(exceed)
    if not (np.isfinite(k) and np.isfinite(sigma)):
        return lw, math.inf, True
    p = (np.arange(1, tail_len + 1) - 0.5) / tail_len
    smoothed = np.log(_gpd_quantile(p, k, sigma) + exp_cut)
    smoothed = np.minimum(smoothed, 0.0)  # the raw maximum after shifting
    out = lw.copy()
    out[tail] = smoothed  # tail is sorted ascending, as are the quantiles
    return out, float(k), False


@dataclass
class LooResult:
    elpd_loo: float
    se: float
    looic: float
    pareto_k: np.ndarray
    elpd_i: np.ndarray
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_high_k(self) -> int:
        return int(np.sum(self.pareto_k > PARETO_K_THRESHOLD))


def psis_loo(loglik) -> LooResult:
    """Leave-one-out expected log predictive density by Pareto-smoothed IS."""
    ll = _matrix(loglik)
    S, n = ll.shape
    if S < MIN_DRAWS:
        raise InsufficientDrawsError(f"PSIS-LOO needs at least {MIN_DRAWS} draws, got {S}")
    if S < WARN_DRAWS:
        warnings.warn(f"only {S} posterior draws; Pareto tail fits are unreliable", RuntimeWarning, stacklevel=2)
    elpd_i = np.empty(n)
    k = np.empty(n)
    degenerate = np.zeros(n, dtype=bool)
    for i in range(n):
        lw, k[i], degenerate[i] = psis_smooth(-ll[:, i])
        elpd_i[i] = logsumexp(lw + ll[:, i]) - logsumexp(lw)
    elpd = float(elpd_i.sum())
    se = float(math.sqrt(n * np.var(elpd_i))) if n > 1 else 0.0
    return LooResult(elpd_loo=elpd, se=se, looic=-2.0 * elpd, pareto_k=k, elpd_i=elpd_i, degenerate=degenerate)


def _pair(observed, fitted):
    a = np.asarray(observed, dtype=float)
    b = np.asarray(fitted, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("observed and fitted must be 1-D arrays of equal length")
    if len(a) == 0:
        raise ShapeError("need at least one observation")
    return a, b


def rmse(observed, fitted) -> float:
    a, b = _pair(observed, fitted)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(observed, fitted) -> float:
    a, b = _pair(observed, fitted)
    return float(np.mean(np.abs(a - b)))


@dataclass
class ModelEntry:
    label: str
    loglik: np.ndarray
    loglik_at_mean: np.ndarray
    observed: np.ndarray
    fitted: np.ndarray
    fit_description: str = ""
    note: str = ""
    observation_labels: Optional[Sequence] = None


@dataclass
class ComparisonReport:
    table: pd.DataFrame
    loo: dict
    notes: list
    observation_labels: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        self.table.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    def loo_frame(self) -> pd.DataFrame:
        frames = []
        for label, res in self.loo.items():
            frames.append(
                pd.DataFrame(
                    {
                        "model": label,
                        "observation": self.observation_labels.get(label, np.arange(1, len(res.elpd_i) + 1)),
                        "elpd_i": res.elpd_i,
                        "pareto_k": res.pareto_k,
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)

    def render(self) -> str:
        cols = ["model", "dic", "p_d", "looic", "rmse", "mae", "n_pareto_k_gt_0.7", "fit_description"]
        text = self.table[cols].to_string(index=False, float_format=lambda v: f"{v:.3f}")
        if self.notes:
            text += "\n\n" + "\n".join(f"note: {n}" for n in self.notes)
        return text


def compare(entries: Sequence) -> ComparisonReport:
    """One row per model, in input order.

    ``entries`` holds :class:`ModelEntry` objects or tuples
    ``(label, loglik, loglik_at_mean, observed, fitted[, fit_description])``.
    """
    if not entries:
        raise ValidationError("compare needs at least one model")
    rows, loo, notes, labels = [], {}, [], {}
    for e in entries:
        if not isinstance(e, ModelEntry):
            e = ModelEntry(*e)
        ll = _matrix(e.loglik)
        d, p_d = dic(ll, e.loglik_at_mean)
        res = psis_loo(ll)
        if e.label in loo:
            raise ValidationError(f"duplicate model label {e.label!r}")
        loo[e.label] = res
        if e.observation_labels is not None:
            if len(e.observation_labels) != ll.shape[1]:
                raise ShapeError("observation_labels length does not match the loglik matrix")
            labels[e.label] = list(e.observation_labels)
        rows.append(
            {
                "model": e.label,
                "dic": d,
                "p_d": p_d,
                "looic": -2.0 * res.elpd_loo,
                "elpd": res.elpd_loo,
                "se_elpd": res.se,
                "rmse": rmse(e.observed, e.fitted),
                "mae": mae(e.observed, e.fitted),
                "n_pareto_k_gt_0.7": res.n_high_k,
                "fit_description": e.fit_description,
            }
        )
        if e.note:
            notes.append(f"{e.label}: {e.note}")
    n_obs = {e_label: len(r.elpd_i) for e_label, r in loo.items()}
    if len(set(n_obs.values())) > 1:
        counts = ", ".join(f"{k}={v}" for k, v in n_obs.items())
        notes.append(f"likelihood-based criteria use different observation counts ({counts}); compare with care")
    return ComparisonReport(pd.DataFrame(rows, columns=COMPARE_COLUMNS), loo, notes, labels)
