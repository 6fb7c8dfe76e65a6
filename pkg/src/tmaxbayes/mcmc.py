"""Adaptive random-walk Metropolis-within-Gibbs over user-declared blocks.

Parameters are declared on their natural (constrained) scale. Positive
parameters carry a ``"log"`` transform: the sampler moves on the log scale
and adds the Jacobian itself, so model code only ever sees constrained
values.

Four update kinds are supported:

* ordinary blocks, updated jointly with an isotropic (later covariance
  shaped) Gaussian random walk;
* independent blocks, whose coordinates are conditionally independent given
  everything else; each coordinate gets its own 1-D Metropolis step, all
  evaluated in one vectorised call to ``TargetDensity.conditional_terms``;
* elliptical blocks, whose coordinates are identity-transformed with a
  standard normal prior contained in ``log_density``; updated by elliptical
  slice sampling, which needs no tuning;
* group moves, one-parameter transformations ``z -> T(z, eps)`` with
  symmetric ``eps`` (``T(T(z, eps), -eps) == z``), used to travel along
  ridges the coordinate updates cannot cross efficiently.

Proposal scales adapt by Robbins-Monro on the log scale during burn-in only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import InitError, InsufficientDrawsError, ShapeError, StuckChainError

TRANSFORMS = ("identity", "log")

_LOG_SCALE_MIN = math.log(1e-10)
_LOG_SCALE_MAX = math.log(1e3)
_STUCK_SCALE = 1e-8
_ADAPT_EXPONENT = 0.6


@dataclass(frozen=True)
class Block:
    indices: tuple
    name: str = ""
    independent: bool = False
    elliptical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if not self.indices:
            raise ValueError("a block needs at least one index")
        if self.independent and self.elliptical:
            raise ValueError("a block cannot be both independent and elliptical")


class GroupMove:
    """A symmetric one-parameter move on the unconstrained scale.

    Subclasses implement :meth:`apply`, returning the moved point and the
    log absolute Jacobian determinant of ``z -> T(z, eps)``.
    """

    name = "move"

    def apply(self, z: np.ndarray, eps: float):
        raise NotImplementedError


@dataclass
class TargetDensity:
    """Unnormalised log posterior and the way it should be explored.

    Parameters
    ----------
    names : sequence of str
        One label per parameter.
    log_density : callable
        Maps a constrained parameter vector to a log density (``-inf``
        outside the support). Must not mutate shared state.
    blocks : sequence of Block
        Partition of ``range(dim)`` into update blocks.
    transforms : sequence of str, optional
        ``"identity"`` or ``"log"`` per parameter; identity by default.
    conditional_terms : callable, optional
        ``conditional_terms(x, block) -> array`` giving, for each index of an
        independent block, every log-density term that involves that
        coordinate. Required when any block is independent.
    moves : sequence of GroupMove
        Extra joint moves applied once per iteration after the blocks.
    """

    names: Sequence[str]
    log_density: Callable[[np.ndarray], float]
    blocks: Sequence[Block]
    transforms: Optional[Sequence[str]] = None
    conditional_terms: Optional[Callable] = None
    moves: Sequence[GroupMove] = ()

    def __post_init__(self):
        self.names = list(self.names)
        if self.transforms is None:
            self.transforms = ["identity"] * len(self.names)
        self.transforms = list(self.transforms)
        if len(self.transforms) != self.dim:
            raise ShapeError("one transform per parameter is required")
        bad = set(self.transforms) - set(TRANSFORMS)
        if bad:
            raise ValueError(f"unknown transforms {sorted(bad)}")
        self.blocks = [b if isinstance(b, Block) else Block(tuple(b)) for b in self.blocks]
        seen = sorted(i for b in self.blocks for i in b.indices)
        if seen != list(range(self.dim)):
            raise ValueError("blocks must partition the parameter indices exactly")
        if any(b.independent for b in self.blocks) and self.conditional_terms is None:
            raise ValueError("independent blocks need conditional_terms")
        self._log_mask = np.array([t == "log" for t in self.transforms])
        for b in self.blocks:
            if b.elliptical and np.any(self._log_mask[list(b.indices)]):
                raise ValueError("elliptical blocks must use the identity transform")

    @property
    def dim(self) -> int:
        return len(self.names)

    def to_unconstrained(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = x.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            z[self._log_mask] = np.log(x[self._log_mask])
        return z

    def to_constrained(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x = z.copy()
        x[..., self._log_mask] = np.exp(z[..., self._log_mask])
        return x

    def log_target(self, z: np.ndarray) -> float:
        """Log density on the unconstrained scale (Jacobian included)."""
        x = self.to_constrained(z)
        lp = self.log_density(x)
        if not np.isfinite(lp):
            return -math.inf
        return float(lp) + float(np.sum(z[self._log_mask]))


@dataclass(frozen=True)
class McmcConfig:
    """Chain protocol. Defaults: 4 chains x 10,000 iterations, 2,000 burn-in, thin 10."""

    chains: int = 4
    iterations: int = 10_000
    burn_in: int = 2_000
    thin: int = 10
    seed: int = 0
    target_acceptance: Optional[float] = None
    init_jitter: float = 0.0

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.target_acceptance is not None and not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")

    @property
    def retained_per_chain(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        return {
            "chains": self.chains,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": int(self.seed),
            "target_acceptance": self.target_acceptance,
            "init_jitter": self.init_jitter,
        }


@dataclass
class PosteriorDraws:
    """Retained draws, shape ``(chains, draws, params)``, constrained scale."""

    names: list
    samples: np.ndarray
    transforms: list
    acceptance: dict = field(default_factory=dict)
    scale_history: Optional[np.ndarray] = None
    scale_labels: list = field(default_factory=list)
    config: Optional[McmcConfig] = None

    @property
    def n_chains(self) -> int:
        return self.samples.shape[0]

    @property
    def n_draws(self) -> int:
        return self.samples.shape[1]

    @property
    def n_total(self) -> int:
        return self.n_chains * self.n_draws

    def index(self, name: str) -> int:
        return self.names.index(name)

    def param(self, name: str) -> np.ndarray:
        """Draws of one parameter as ``(chains, draws)``."""
        return self.samples[:, :, self.index(name)]

    def flat(self, names=None) -> np.ndarray:
        """Draws stacked over chains, ``(chains * draws, k)``."""
        cols = [self.index(n) for n in names] if names is not None else slice(None)
        return self.samples[:, :, cols].reshape(-1, self.samples.shape[2] if names is None else len(names))

    def subset(self, names) -> "PosteriorDraws":
        cols = [self.index(n) for n in names]
        return replace(
            self,
            names=list(names),
            samples=self.samples[:, :, cols],
            transforms=[self.transforms[c] for c in cols],
        )

    def mean_point(self) -> dict:
        """Posterior mean taken on the unconstrained scale, mapped back."""
        out = {}
        for j, (name, tr) in enumerate(zip(self.names, self.transforms)):
            v = self.samples[:, :, j]
            out[name] = float(np.exp(np.mean(np.log(v)))) if tr == "log" else float(np.mean(v))
        return out


def _default_target(size: int) -> float:
    return 0.44 if size == 1 else 0.234


class _Chain:
    """Mutable sampler state for one chain; never shared across chains."""

    def __init__(self, target: TargetDensity, z0: np.ndarray, config: McmcConfig, rng):
        self.target = target
        self.config = config
        self.rng = rng
        self.z = z0.copy()
        self.lp = target.log_target(self.z)
        self.units = []  # (kind, payload) in update order
        for b in target.blocks:
            idx = np.array(b.indices)
            if b.independent:
                self.units.append(("indep", b, idx))
            elif b.elliptical:
                self.units.append(("ellip", b, idx))
            else:
                self.units.append(("block", b, idx))
        for m in target.moves:
            self.units.append(("move", m, None))
        self.log_scale = []
        self.goal = []
        self.chol = []
        for kind, obj, idx in self.units:
            size = len(idx) if kind == "block" else 1
            goal = config.target_acceptance if config.target_acceptance is not None else _default_target(size)
            self.goal.append(goal)
            if kind == "indep":
                self.log_scale.append(np.full(len(idx), math.log(0.1)))
            else:
                self.log_scale.append(math.log(0.1))
            self.chol.append(None)
        self.accepts = [np.zeros(len(idx)) if k == "indep" else 0.0 for k, _, idx in self.units]

    def _step_block(self, u, idx, gain):
        d = len(idx)
        noise = self.rng.standard_normal(d)
        if self.chol[u] is not None:
            noise = self.chol[u] @ noise
        prop = self.z.copy()
        prop[idx] += math.exp(self.log_scale[u]) * noise
        lp_prop = self.target.log_target(prop)
        log_r = lp_prop - self.lp
        acc_prob = 1.0 if log_r >= 0 else math.exp(log_r) if np.isfinite(log_r) else 0.0
        accepted = self.rng.random() < acc_prob
        if accepted:
            self.z, self.lp = prop, lp_prop
        if gain:
            self.log_scale[u] = min(_LOG_SCALE_MAX, max(_LOG_SCALE_MIN, self.log_scale[u] + gain * (acc_prob - self.goal[u])))
        return float(accepted)

    def _terms(self, z, block, idx):
        x = self.target.to_constrained(z)
        t = np.asarray(self.target.conditional_terms(x, block), dtype=float)
        t = t + np.where(self.target._log_mask[idx], z[idx], 0.0)
        return np.where(np.isnan(t), -np.inf, t)

    def _step_indep(self, u, block, idx, gain):
        cur = self._terms(self.z, block, idx)
        prop = self.z.copy()
        prop[idx] += np.exp(self.log_scale[u]) * self.rng.standard_normal(len(idx))
        new = self._terms(prop, block, idx)
        with np.errstate(invalid="ignore"):
            log_r = np.where(np.isfinite(new), new - cur, -np.inf)
        acc_prob = np.exp(np.minimum(log_r, 0.0))
        accepted = self.rng.random(len(idx)) < acc_prob
        self.z[idx] = np.where(accepted, prop[idx], self.z[idx])
        self.lp = self.target.log_target(self.z)
        if gain:
            self.log_scale[u] = np.clip(self.log_scale[u] + gain * (acc_prob - self.goal[u]), _LOG_SCALE_MIN, _LOG_SCALE_MAX)
        return accepted.astype(float)

    def _step_ellip(self, u, idx):
        # slice on the likelihood part; the N(0, I) prior of the block is exact
        def loglik(z):
            return self.target.log_target(z) + 0.5 * float(z[idx] @ z[idx])

        x0 = self.z[idx].copy()
        nu = self.rng.standard_normal(len(idx))
        threshold = loglik(self.z) + math.log(self.rng.random())
        angle = self.rng.uniform(0.0, 2.0 * math.pi)
        lo, hi = angle - 2.0 * math.pi, angle
        prop = self.z.copy()
        for _ in range(200):
            prop[idx] = x0 * math.cos(angle) + nu * math.sin(angle)
            ll = loglik(prop)
            if ll > threshold:
                self.z = prop
                self.lp = self.target.log_target(prop)
                return 1.0
            if angle < 0:
                lo = angle
            else:
                hi = angle
            angle = self.rng.uniform(lo, hi)
        return 0.0

    def _step_move(self, u, move, gain):
        eps = math.exp(self.log_scale[u]) * self.rng.standard_normal()
        prop, log_jac = move.apply(self.z, eps)
        lp_prop = self.target.log_target(prop)
        log_r = lp_prop - self.lp + log_jac
        acc_prob = 1.0 if log_r >= 0 else math.exp(log_r) if np.isfinite(log_r) else 0.0
        accepted = self.rng.random() < acc_prob
        if accepted:
            self.z, self.lp = prop, lp_prop
        if gain:
            self.log_scale[u] = min(_LOG_SCALE_MAX, max(_LOG_SCALE_MIN, self.log_scale[u] + gain * (acc_prob - self.goal[u])))
        return float(accepted)

    def sweep(self, gain):
        acc = []
        for u, (kind, obj, idx) in enumerate(self.units):
            if kind == "block":
                acc.append(self._step_block(u, idx, gain))
            elif kind == "indep":
                acc.append(self._step_indep(u, obj, idx, gain))
            elif kind == "ellip":
                acc.append(self._step_ellip(u, idx))
            else:
                acc.append(self._step_move(u, obj, gain))
        return acc

    def shape_proposals(self, history):
        """Replace isotropic proposals of multi-dim blocks by the burn-in covariance."""
        for u, (kind, obj, idx) in enumerate(self.units):
            if kind != "block" or len(idx) < 2:
                continue
            cov = np.cov(history[:, idx], rowvar=False)
            if not np.all(np.isfinite(cov)):
                continue
            cov = cov + 1e-10 * np.eye(len(idx)) * max(1.0, float(np.max(np.diag(cov))))
            try:
                self.chol[u] = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                continue
            self.log_scale[u] = math.log(2.38 / math.sqrt(len(idx)))

    def scale_summary(self):
        return [float(np.mean(s)) if isinstance(s, np.ndarray) else s for s in self.log_scale]


def _unit_labels(target: TargetDensity):
    labels = []
    for i, b in enumerate(target.blocks):
        labels.append(b.name or "+".join(target.names[j] for j in b.indices[:3]) + ("..." if len(b.indices) > 3 else ""))
    for m in target.moves:
        labels.append(getattr(m, "name", "move"))
    return labels


def _run_one(target: TargetDensity, z_init: np.ndarray, config: McmcConfig, chain: int):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(config.seed), spawn_key=(chain,)))
    z0 = z_init.copy()
    if config.init_jitter > 0:
        jitter = config.init_jitter
        for _ in range(50):
            cand = z_init + jitter * rng.standard_normal(len(z_init))
            if np.isfinite(target.log_target(cand)):
                z0 = cand
                break
            jitter /= 2
    state = _Chain(target, z0, config, rng)

    n_keep = config.retained_per_chain
    kept_z = np.empty((n_keep, target.dim))
    n_units = len(state.units)
    scale_hist = np.empty((config.iterations, n_units))
    burn_acc = [np.zeros_like(a) if isinstance(a, np.ndarray) else 0.0 for a in state.accepts]
    post_acc = [np.zeros_like(a) if isinstance(a, np.ndarray) else 0.0 for a in state.accepts]

    shape_at = config.burn_in // 2 if config.burn_in >= 200 else None
    history = np.empty((config.burn_in, target.dim)) if shape_at else None

    k = 0
    for it in range(config.iterations):
        adapting = it < config.burn_in
        gain = (it + 1) ** -_ADAPT_EXPONENT if adapting else 0.0
        acc = state.sweep(gain)
        if adapting:
            for u in range(n_units):
                burn_acc[u] = burn_acc[u] + acc[u]
            if history is not None:
                history[it] = state.z
            if shape_at is not None and it + 1 == shape_at:
                state.shape_proposals(history[shape_at // 2 : shape_at])
        else:
            for u in range(n_units):
                post_acc[u] = post_acc[u] + acc[u]
            if (it - config.burn_in + 1) % config.thin == 0:
                kept_z[k] = state.z
                k += 1
        scale_hist[it] = state.scale_summary()

        if it + 1 == config.burn_in:
            _check_stuck(target, state, burn_acc)

    n_post = config.iterations - config.burn_in
    acc_rates = [float(np.mean(a)) / n_post for a in post_acc]
    return target.to_constrained(kept_z), acc_rates, scale_hist


def _check_stuck(target, state, burn_acc):
    labels = _unit_labels(target)
    for u, (kind, obj, idx) in enumerate(state.units):
        scale = np.exp(state.log_scale[u])
        if kind == "indep":
            stuck = (burn_acc[u] == 0) & (scale <= _STUCK_SCALE)
            if np.any(stuck):
                name = target.names[int(idx[np.flatnonzero(stuck)[0]])]
                raise StuckChainError(f"block {labels[u]!r} (coordinate {name}) rejected every burn-in proposal", block=name)
        elif kind == "ellip":
            if burn_acc[u] == 0:
                raise StuckChainError(f"elliptical block {labels[u]!r} never left its starting point", block=labels[u])
        elif burn_acc[u] == 0 and scale <= _STUCK_SCALE:
            raise StuckChainError(f"block {labels[u]!r} rejected every burn-in proposal", block=labels[u])


def run_chains(target: TargetDensity, init, config: McmcConfig, n_jobs: int = 1) -> PosteriorDraws:
    """Run ``config.chains`` independent chains from ``init`` (constrained scale).

    Chain ``c`` draws from a stream seeded by ``(config.seed, c)`` so the
    output does not depend on ``n_jobs`` or on execution order.
    """
    init = np.asarray(init, dtype=float)
    if init.shape != (target.dim,):
        raise ShapeError(f"init must have shape ({target.dim},)")
    z_init = target.to_unconstrained(init)
    if not np.all(np.isfinite(z_init)) or not np.isfinite(target.log_target(z_init)):
        raise InitError("log density is not finite at the initial point")

    if n_jobs == 1 or config.chains == 1:
        results = [_run_one(target, z_init, config, c) for c in range(config.chains)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_run_one)(target, z_init, config, c) for c in range(config.chains))

    labels = _unit_labels(target)
    samples = np.stack([r[0] for r in results])
    acceptance = {lab: np.array([r[1][u] for r in results]) for u, lab in enumerate(labels)}
    return PosteriorDraws(
        names=list(target.names),
        samples=samples,
        transforms=list(target.transforms),
        acceptance=acceptance,
        scale_history=np.stack([r[2] for r in results]),
        scale_labels=labels,
        config=config,
    )


# -- diagnostics -------------------------------------------------------------


def _as_array(draws) -> np.ndarray:
    x = draws.samples if isinstance(draws, PosteriorDraws) else np.asarray(draws, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ShapeError("draws must be (chains, draws) or (chains, draws, params)")
    return x


@dataclass
class Diagnostics:
    rhat: np.ndarray
    ess: np.ndarray
    degenerate: np.ndarray


def _split_rhat(x):
    m, n, p = x.shape
    if n < 2:
        raise InsufficientDrawsError("split R-hat needs at least 2 draws per chain")
    half = n // 2
    halves = np.concatenate([x[:, :half], x[:, n - half :]], axis=0)
    w_chain = halves.var(axis=1, ddof=1)
    W = w_chain.mean(axis=0)
    B = half * halves.mean(axis=1).var(axis=0, ddof=1)
    degenerate = W <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        var_plus = (half - 1) / half * W + B / half
        rhat = np.sqrt(var_plus / W)
    # the raw ratio dips below 1 by sampling noise when chains are short
    rhat = np.where(degenerate, 1.0, np.maximum(rhat, 1.0))
    return rhat, degenerate


def split_rhat(draws) -> np.ndarray:
    """Split-chain potential scale reduction factor per parameter.

    Values are floored at 1. Parameters whose half-chains all have zero
    variance report 1.0; use :func:`diagnose` to see the degenerate flag.
    """
    return _split_rhat(_as_array(draws))[0]


def _autocov(x):
    # biased autocovariance along axis 1 via FFT
    n = x.shape[1]
    size = 1 << (2 * n - 1).bit_length()
    c = x - x.mean(axis=1, keepdims=True)
    f = np.fft.rfft(c, n=size, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), n=size, axis=1)[:, :n]
    return acov / n


def _ess_1d(x):
    m, n = x.shape
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0 or mean_var <= 0:
        return float(m * n), True
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    # Geyer initial positive sequence on pair sums, made monotone
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    total = 0.0
    prev = math.inf
    for p in pairs:
        if p <= 0:
            break
        p = min(p, prev)
        total += p
        prev = p
    tau = -1.0 + 2.0 * total
    # antithetic chains can push tau below 1; ESS is capped at the draw count
    tau = max(tau, 1.0)
    return float(m * n / tau), False


def ess(draws) -> np.ndarray:
    """Effective sample size per parameter (Geyer initial monotone sequence)."""
    x = _as_array(draws)
    if x.shape[1] < 10:
        raise InsufficientDrawsError("ESS needs at least 10 draws per chain")
    return np.array([_ess_1d(x[:, :, j])[0] for j in range(x.shape[2])])


def diagnose_arrays(draws) -> Diagnostics:
    x = _as_array(draws)
    rhat, deg = _split_rhat(x)
    out = [_ess_1d(x[:, :, j]) for j in range(x.shape[2])]
    e = np.array([o[0] for o in out])
    deg = deg | np.array([o[1] for o in out])
    return Diagnostics(rhat=rhat, ess=e, degenerate=deg)


def summarize(draws, names=None) -> pd.DataFrame:
    """Posterior mean, sd and 2.5/50/97.5% quantiles (type-7) per parameter."""
    x = _as_array(draws)
    if x.shape[0] * x.shape[1] == 0:
        raise InsufficientDrawsError("no draws to summarise")
    if names is None:
        names = draws.names if isinstance(draws, PosteriorDraws) else [f"x{j}" for j in range(x.shape[2])]
    flat = x.reshape(-1, x.shape[2])
    sd = flat.std(axis=0, ddof=1) if flat.shape[0] > 1 else np.zeros(flat.shape[1])
    q = np.quantile(flat, [0.025, 0.5, 0.975], axis=0)
    return pd.DataFrame(
        {"mean": flat.mean(axis=0), "sd": sd, "q2.5": q[0], "q50": q[1], "q97.5": q[2]},
        index=pd.Index(list(names), name="param"),
    )


def diagnose(draws, names=None) -> pd.DataFrame:
    """Summary table with ``rhat`` and ``ess`` columns prepended."""
    summary = summarize(draws, names)
    d = diagnose_arrays(draws)
    summary.insert(0, "ess", d.ess)
    summary.insert(0, "rhat", d.rhat)
    return summary


# -- file exports --------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def write_draws_csv(draws: PosteriorDraws, path) -> None:
    """``chain,iter,<names>``; ``iter`` is the 1-based sampler iteration."""
    cfg = draws.config
    burn = cfg.burn_in if cfg else 0
    thin = cfg.thin if cfg else 1
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "iter"] + list(draws.names))
        for c in range(draws.n_chains):
            for k in range(draws.n_draws):
                w.writerow([c, burn + (k + 1) * thin] + [_fmt(v) for v in draws.samples[c, k]])


def read_draws_csv(path):
    """Returns ``(names, samples)`` with samples shaped ``(chains, draws, params)``."""
    df = pd.read_csv(path, float_precision="round_trip")
    names = [c for c in df.columns if c not in ("chain", "iter")]
    chains = sorted(df["chain"].unique())
    per = [df.loc[df["chain"] == c, names].to_numpy(dtype=float) for c in chains]
    n = min(len(p) for p in per)
    return names, np.stack([p[:n] for p in per])


def write_summary_csv(table: pd.DataFrame, path) -> None:
    cols = ["rhat", "ess", "mean", "sd", "q2.5", "q50", "q97.5"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param"] + cols)
        for name, row in table[cols].iterrows():
            w.writerow([name] + [_fmt(row[c]) for c in cols])
