"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary. Criterion 10 needs the public 1901-2017 seasonal file,
passed through the TMAXBAYES_REAL_DATA environment variable, and only warns.
"""

import json
import math
import os
import time
import warnings

import numpy as np
import pandas as pd
import pytest
from scipy import integrate, stats

from conftest import seasonal_csv_text
from oracles import basis_cross_integral_gl, conjugate_normal_mean_loo, stratified_increment_density
from tmaxbayes import bsar, ctrw
from tmaxbayes.bsar import build_basis, cross_integrals, predict, trend_draws
from tmaxbayes.cli import main
from tmaxbayes.comparison import dic, psis_loo
from tmaxbayes.ctrw import CtrwParams, marginal_increment_logpdf, simulate
from tmaxbayes.mcmc import McmcConfig, diagnose, split_rhat
from tmaxbayes.series import correlation_matrix, load_csv, series_from_arrays

pytestmark = pytest.mark.slow

TRUTH = CtrwParams(0.05, 0.1, 2.0, 2.0)


@pytest.fixture(scope="module")
def bsar_recovery():
    n = 117
    rng = np.random.default_rng(5)
    years = np.arange(1901, 1901 + n)
    t = np.linspace(0.0, 1.0, n)
    x = (years - years.mean()) / years.std(ddof=1)
    truth = 1.0 + 0.5 * x + 0.8 * (t**2 - 1 / 3)
    series = series_from_arrays(years, truth + 0.1 * rng.normal(size=n))
    return series, truth, bsar.fit(series, McmcConfig(seed=2, init_jitter=0.1), J=20)


def test_chain_protocol(report):
    cfg = McmcConfig(seed=1)
    y = simulate(TRUTH, 33.0, 117, seed=1)
    start = time.perf_counter()
    draws = ctrw.fit(series_from_arrays(np.arange(1901, 2018), y), config=cfg)
    elapsed = time.perf_counter() - start
    ok = cfg.chains * cfg.retained_per_chain == 3200 and draws.samples.shape == (4, 800, 4) and elapsed < 600
    report(1, "default protocol keeps 3200 draws; CTRW n=117 under 10 min", ok, f"shape {draws.samples.shape}, {elapsed:.1f} s")
    assert ok


def test_ctrw_recovery(report):
    y = simulate(TRUTH, 30.0, 500, seed=11)
    draws = ctrw.fit(series_from_arrays(np.arange(500), y), config=McmcConfig(seed=3, init_jitter=0.1))
    table = diagnose(draws)
    truth = {"mu": TRUTH.mu, "tau": TRUTH.tau, "alpha": TRUTH.alpha, "beta": TRUTH.beta}
    z = {k: abs(table.loc[k, "mean"] - v) / table.loc[k, "sd"] for k, v in truth.items()}
    ok = all(v < 3 for v in z.values()) and bool(np.all(table["rhat"] < 1.05))
    detail = ", ".join(f"{k} z={z[k]:.2f} rhat={table.loc[k, 'rhat']:.3f}" for k in truth)
    report(2, "CTRW recovery within 3 sd, rhat < 1.05", ok, detail)
    assert ok


def test_marginal_density_oracle(report):
    mean, sd = TRUTH.mean_increment, math.sqrt(TRUTH.var_increment)
    grid = mean + np.linspace(-4 * sd, 4 * sd, 40)
    quad = np.exp(marginal_increment_logpdf(grid, TRUTH))
    mc = stratified_increment_density(grid, TRUTH.mu, TRUTH.tau, TRUTH.alpha, TRUTH.beta)
    err = float(np.max(np.abs(quad - mc)))
    f = lambda d: math.exp(marginal_increment_logpdf(d, TRUTH))
    mass, _ = integrate.quad(f, mean - 60 * sd, mean + 60 * sd, points=[0.0], limit=400)
    ok = err < 5e-3 and abs(mass - 1) < 5e-4
    report(3, "quadrature density vs Monte Carlo within 5e-3; mass 1 +- 5e-4", ok, f"max err {err:.2e}, mass {mass:.6f}")
    assert ok


def test_bsar_structure(report, bsar_recovery):
    series, _, draws = bsar_recovery
    basis = build_basis(20, series.t)
    grid = np.linspace(0.0, 1.0, 200)
    worst_step = float(np.min(np.diff(trend_draws(draws, basis, grid), axis=1)))
    fine = np.linspace(0.0, 1.0, 2001)
    worst_mean = float(np.max(np.abs(integrate.simpson(trend_draws(draws, basis, fine), x=fine, axis=1))))
    A = cross_integrals(20, grid)
    worst_gl = max(
        float(np.max(np.abs(A[:, j, k] - basis_cross_integral_gl(j, k, grid)))) for j in range(21) for k in range(j, 21)
    )
    ok = worst_step >= -1e-12 and worst_mean < 1e-6 and worst_gl < 1e-8
    detail = f"min step {worst_step:.1e}, max |int f| {worst_mean:.1e}, basis err {worst_gl:.1e}"
    report(4, "every BSAR draw monotone and centred; basis integrals exact", ok, detail)
    assert ok


def test_bsar_recovery(report, bsar_recovery):
    series, truth, draws = bsar_recovery
    fit = predict(draws, series, build_basis(20, series.t)).fit_mean
    err = float(np.sqrt(np.mean((fit - truth) ** 2)))
    rhat = diagnose(draws)["rhat"]
    ok = err < 0.1 and rhat["beta1"] < 1.05 and rhat["sigma"] < 1.05
    report(5, "BSAR curve RMSE < 0.1, rhat < 1.05 on beta1 and sigma", ok, f"rmse {err:.4f}, rhat {rhat['beta1']:.3f}/{rhat['sigma']:.3f}")
    assert ok


def test_psis_loo(report):
    rng = np.random.default_rng(0)
    n, S, prior_sd = 50, 4000, 10.0
    y = rng.normal(0.7, 1.0, size=n)
    prec = 1 / prior_sd**2 + n
    m = rng.normal(y.sum() / prec, 1 / math.sqrt(prec), size=S)
    res = psis_loo(stats.norm.logpdf(y[None, :], m[:, None], 1.0))
    gap = abs(res.elpd_loo - conjugate_normal_mean_loo(y, 1.0, prior_sd).sum())
    report(6, "PSIS elpd within 0.3 of exact LOO", gap < 0.3, f"gap {gap:.4f}")
    assert gap < 0.3


def test_dic(report):
    rng = np.random.default_rng(0)
    k, n, S = 3, 200, 4000
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = X @ rng.normal(size=k) + rng.normal(size=n)
    cov = np.linalg.inv(X.T @ X)
    b = rng.multivariate_normal(cov @ X.T @ y, cov, size=S)
    _, p_d = dic(stats.norm.logpdf(y[None, :], b @ X.T, 1.0), stats.norm.logpdf(y, X @ b.mean(axis=0), 1.0))
    ok = 0.8 * k <= p_d <= 1.2 * k
    report(7, "p_D within [0.8k, 1.2k] for k=3", ok, f"p_D {p_d:.3f}")
    assert ok


def test_rhat_diagnostics(report):
    iid = [float(split_rhat(np.random.default_rng(s).normal(size=(4, 1000, 1)))[0]) for s in range(20)]
    rng = np.random.default_rng(0)
    apart = np.concatenate([rng.normal(0, 1, (1, 1000, 1)), rng.normal(3, 1, (1, 1000, 1))])
    sep = float(split_rhat(apart)[0])
    ok = max(iid) < 1.01 and sep > 1.1
    report(8, "iid chains rhat < 1.01 over 20 seeds; separated chains > 1.1", ok, f"max iid {max(iid):.4f}, separated {sep:.2f}")
    assert ok


def _pipeline(root, monkeypatch):
    root.mkdir()
    monkeypatch.chdir(root)
    (root / "data.csv").write_text(seasonal_csv_text(40, seed=3), encoding="utf-8")
    fast = ["--chains", "2", "--iters", "600", "--burnin", "200", "--thin", "2", "--seed", "9"]
    steps = [
        ["ingest", "--input", "data.csv", "--out", "ingest"],
        ["simulate", "--mu", "0.05", "--tau", "0.1", "--alpha", "2", "--beta", "2", "--n", "60", "--seed", "4", "--out", "sim"],
        ["fit-ctrw", "--input", "data.csv", "--out", "ctrw", *fast],
        ["fit-bsar", "--input", "data.csv", "--out", "bsar", "--basis-J", "8", *fast],
        ["fit-ctrw", "--input", "sim/series.csv", "--out", "ctrw_sim", *fast],
        ["compare", "--runs", "ctrw", "bsar", "--out", "cmp"],
        ["plot-data", "--run", "ctrw"],
        ["plot-data", "--run", "bsar"],
    ]
    for args in steps:
        assert main(args) == 0, args
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cli_determinism(report, tmp_path, monkeypatch):
    first = _pipeline(tmp_path / "a", monkeypatch)
    second = _pipeline(tmp_path / "b", monkeypatch)
    differ = [str(p) for p in first if first[p] != second.get(p)]
    ok = set(first) == set(second) and not differ and len(first) > 20
    report(9, "identical runs are byte-identical across all outputs", ok, f"{len(first)} files, {len(differ)} differ")
    assert ok


def test_real_data_directional(report, tmp_path, monkeypatch):
    path = os.environ.get("TMAXBAYES_REAL_DATA")
    if not path:
        report(10, "real-data directional checks", "SKIP", "set TMAXBAYES_REAL_DATA to the 1901-2017 seasonal CSV")
        pytest.skip("TMAXBAYES_REAL_DATA not set")
    extra = []
    if os.environ.get("TMAXBAYES_REAL_DATA_COLUMNS"):
        extra = ["--column-map", os.environ["TMAXBAYES_REAL_DATA_COLUMNS"]]
    column_map = dict(kv.split("=", 1) for kv in extra[1].split(",")) if extra else None
    table = load_csv(path, column_map)
    r = float(correlation_matrix(table)[0, 4])
    monkeypatch.chdir(tmp_path)
    for cmd, out in (("fit-ctrw", "ctrw"), ("fit-bsar", "bsar")):
        assert main([cmd, "--input", path, "--out", out, "--seed", "1", *extra]) == 0
    assert main(["compare", "--runs", "ctrw", "bsar", "--out", "cmp"]) == 0
    cmp = pd.read_csv(tmp_path / "cmp" / "compare.csv").set_index("model")
    checks = {
        "post-monsoon/annual r = 0.90 +- 0.02": abs(r - 0.90) <= 0.02,
        "DIC(CTRW) < DIC(BSAR)": cmp.loc["CTRW", "dic"] < cmp.loc["BSAR", "dic"],
        "LOOIC(CTRW) < LOOIC(BSAR)": cmp.loc["CTRW", "looic"] < cmp.loc["BSAR", "looic"],
        "RMSE in [0.05, 0.35]": bool(cmp["rmse"].between(0.05, 0.35).all()),
    }
    failed = [name for name, good in checks.items() if not good]
    detail = f"r {r:.3f}; " + json.dumps(cmp[["dic", "looic", "rmse"]].round(3).to_dict())
    for name in failed:
        warnings.warn(f"real-data directional check failed: {name}", UserWarning)
    report(10, "real-data directional checks (warn only)", "PASS" if not failed else "WARN", detail)
