"""Command-line driver.

Every command writes plain CSV/JSON into an output directory together with
``manifest.json`` holding the resolved configuration. Exit status is 0 on
success, 1 for usage or input problems and 2 for numerical failures.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import bsar, comparison as cmp, ctrw, mcmc
from .exceptions import InputError, NumericalError, TmaxError
from .series import (
    COLUMNS,
    correlation_matrix,
    increments,
    load_csv,
    make_table,
    normalize,
    write_csv,
    write_matrix_csv,
    write_normalized_csv,
)

CTRW_DESCRIPTION = "Dynamic (jump + waiting)"
BSAR_DESCRIPTION = "Semiparametric GP + linear"


class MissingArtifactError(InputError):
    pass


def _pkg_version():
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover - running from a source tree
        return "0+unknown"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_frame(df: pd.DataFrame, path) -> None:
    """CSV with shortest round-trip float formatting (byte-stable)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(df.columns))
        for row in df.itertuples(index=False, name=None):
            w.writerow([_fmt(v) for v in row])


def write_manifest(out: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["package_version"] = _pkg_version()
    (out / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(run: Path) -> dict:
    path = run / "manifest.json"
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_column_map(text):
    """``"annual=TMAX,year=YR"`` -> ``{"annual": "TMAX", "year": "YR"}``."""
    if not text:
        return None
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise click.BadParameter(f"expected key=HEADER, got {part!r}", param_hint="--column-map")
        key, header = part.split("=", 1)
        out[key.strip()] = header.strip()
    return out


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def chain_options(f):
    f = click.option("--thin", default=10, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--burnin", default=2_000, show_default=True, type=click.IntRange(min=0))(f)
    f = click.option("--iters", default=10_000, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--chains", default=4, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--seed", required=True, type=click.IntRange(min=0, max=2**64 - 1), help="Master seed (required).")(f)
    return f


def io_options(f):
    f = click.option("--allow-seasonal-exceed", is_flag=True, help="Accept seasonal maxima above the annual maximum.")(f)
    f = click.option("--column", default="annual", show_default=True, type=click.Choice(COLUMNS))(f)
    f = click.option("--column-map", default=None, help="Header overrides, e.g. 'year=Yr,annual=TMAX'.")(f)
    f = click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")(f)
    f = click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False), help="Input CSV.")(f)
    return f


def _config(seed, chains, iters, burnin, thin):
    try:
        return mcmc.McmcConfig(chains=chains, iterations=iters, burn_in=burnin, thin=thin, seed=seed, init_jitter=0.1)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load(input_path, column_map, column, allow):
    if not Path(input_path).exists():
        raise InputError(f"input file not found: {input_path}")
    table = load_csv(input_path, parse_column_map(column_map), allow_seasonal_exceed=allow)
    return table, normalize(table, column)


def _write_fit_outputs(out, draws, fitted, loglik, at_mean, obs_labels):
    mcmc.write_draws_csv(draws, out / "draws.csv")
    mcmc.write_summary_csv(mcmc.diagnose(draws), out / "summary.csv")
    write_frame(fitted.to_frame(), out / "fitted.csv")
    ll = pd.DataFrame(loglik, columns=[str(o) for o in obs_labels])
    ll.insert(0, "draw", np.arange(1, len(loglik) + 1))
    write_frame(ll, out / "loglik.csv")
    write_frame(pd.DataFrame({"observation": [str(o) for o in obs_labels], "loglik": at_mean}), out / "loglik_mean.csv")


def _print_fit_summary(label, series, draws, note=""):
    table = mcmc.diagnose(draws)
    click.echo(f"{label} fit: {len(series)} observations, years {series.years[0]}-{series.years[-1]}")
    cfg = draws.config
    click.echo(
        f"chains={cfg.chains} iterations={cfg.iterations} burn_in={cfg.burn_in} thin={cfg.thin} "
        f"seed={cfg.seed} retained={draws.n_total}"
    )
    click.echo(table.to_string(float_format=lambda v: f"{v:.4g}"))
    click.echo("acceptance: " + ", ".join(f"{k}={np.mean(v):.2f}" for k, v in draws.acceptance.items()))
    bad = table.index[table["rhat"] > 1.05].tolist()
    if bad:
        click.echo(f"warning: R-hat above 1.05 for {bad}")
    if note:
        click.echo(note)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Bayesian CTRW and monotone-trend models for annual maximum temperature."""


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--column-map", default=None)
@click.option("--column", default="annual", show_default=True, type=click.Choice(COLUMNS))
@click.option("--allow-seasonal-exceed", is_flag=True)
def ingest(input_path, out, column_map, column, allow_seasonal_exceed):
    """Validate a table; write the normalised series and correlation matrix."""
    table, series = _load(input_path, column_map, column, allow_seasonal_exceed)
    out = _outdir(out)
    write_csv(table, out / "table.csv")
    write_normalized_csv(series, out / "normalized.csv")
    click.echo(f"{len(table)} years, {table.years[0]}-{table.years[-1]}")
    if table.has_seasons and not any(np.isnan(table.column(c)).any() for c in COLUMNS):
        corr = correlation_matrix(table)
        write_matrix_csv(corr, COLUMNS, out / "correlation.csv")
        click.echo(pd.DataFrame(corr, index=COLUMNS, columns=COLUMNS).round(3).to_string())
    write_manifest(
        out,
        {
            "command": "ingest",
            "input": str(input_path),
            "input_sha256": _sha256(input_path),
            "column": column,
            "column_map": parse_column_map(column_map),
            "allow_seasonal_exceed": allow_seasonal_exceed,
        },
    )


@cli.command("fit-ctrw")
@io_options
@chain_options
@click.option("--quad-nodes", default=401, show_default=True, type=click.IntRange(min=3))
@click.option("--fix-mean-wait", is_flag=True, help="Tie beta to alpha (unit mean waiting time).")
@click.option("--predictive-draws", default=20, show_default=True, type=click.IntRange(min=1))
def fit_ctrw(input_path, out, column_map, column, allow_seasonal_exceed, seed, chains, iters, burnin, thin, quad_nodes, fix_mean_wait, predictive_draws):
    """Fit the coupled CTRW model."""
    if quad_nodes % 2 == 0:
        raise InputError("--quad-nodes must be odd")
    config = _config(seed, chains, iters, burnin, thin)
    table, series = _load(input_path, column_map, column, allow_seasonal_exceed)
    deltas = increments(series)
    draws = ctrw.fit(deltas, config=config, fix_mean_wait=fix_mean_wait)
    fitted = ctrw.predict_one_step(draws, series, seed=seed, per_draw=predictive_draws)
    loglik = ctrw.pointwise_loglik(draws, deltas, quad_nodes)
    at_mean = ctrw.loglik_at_mean(draws, deltas, quad_nodes)
    out = _outdir(out)
    _write_fit_outputs(out, draws, fitted, loglik, at_mean, series.years[1:])
    write_manifest(
        out,
        {
            "command": "fit-ctrw",
            "model": "CTRW",
            "fit_description": CTRW_DESCRIPTION,
            "input": str(input_path),
            "input_sha256": _sha256(input_path),
            "column": column,
            "column_map": parse_column_map(column_map),
            "allow_seasonal_exceed": allow_seasonal_exceed,
            "mcmc": config.to_dict(),
            "quad_nodes": quad_nodes,
            "fix_mean_wait": fix_mean_wait,
            "predictive_draws": predictive_draws,
            "n_observations": len(series),
            "likelihood_unit": "increments",
            "metric_skip_rows": 1,
        },
    )
    _print_fit_summary("CTRW", series, draws, note="likelihood on year-to-year increments; fit is one-step-ahead")


@cli.command("fit-bsar")
@io_options
@chain_options
@click.option("--basis-J", "basis_j", default=20, show_default=True, type=click.IntRange(min=1))
@click.option("--band", default="trend", show_default=True, type=click.Choice(["trend", "predictive"]))
def fit_bsar(input_path, out, column_map, column, allow_seasonal_exceed, seed, chains, iters, burnin, thin, basis_j, band):
    """Fit the linear + monotone spectral trend model."""
    config = _config(seed, chains, iters, burnin, thin)
    table, series = _load(input_path, column_map, column, allow_seasonal_exceed)
    draws = bsar.fit(series, config, basis_j)
    basis = bsar.build_basis(basis_j, series.t)
    fitted = bsar.predict(draws, series, basis, band=band, seed=seed)
    loglik = bsar.pointwise_loglik(draws, series, basis)
    at_mean = bsar.loglik_at_mean(draws, series, basis)
    out = _outdir(out)
    _write_fit_outputs(out, draws, fitted, loglik, at_mean, series.years)
    write_frame(bsar.trend_frame(draws, series, basis), out / "trend.csv")
    write_manifest(
        out,
        {
            "command": "fit-bsar",
            "model": "BSAR",
            "fit_description": BSAR_DESCRIPTION,
            "input": str(input_path),
            "input_sha256": _sha256(input_path),
            "column": column,
            "column_map": parse_column_map(column_map),
            "allow_seasonal_exceed": allow_seasonal_exceed,
            "mcmc": config.to_dict(),
            "basis_J": basis_j,
            "dic_plugin": "curve",
            "band": band,
            "n_observations": len(series),
            "likelihood_unit": "levels",
            "metric_skip_rows": 0,
        },
    )
    _print_fit_summary("BSAR", series, draws)


@cli.command()
@click.option("--model", default="ctrw", type=click.Choice(["ctrw"]), show_default=True)
@click.option("--mu", required=True, type=float)
@click.option("--tau", required=True, type=float)
@click.option("--alpha", required=True, type=float)
@click.option("--beta", required=True, type=float)
@click.option("--n", "n", required=True, type=click.IntRange(min=2))
@click.option("--seed", required=True, type=click.IntRange(min=0, max=2**64 - 1))
@click.option("--t0", default=0.0, show_default=True, type=float, help="Starting value.")
@click.option("--start-year", default=1901, show_default=True, type=int)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
def simulate(model, mu, tau, alpha, beta, n, seed, t0, start_year, out):
    """Simulate a CTRW path (simulation.csv and an ingestible series.csv)."""
    try:
        params = ctrw.CtrwParams(mu, tau, alpha, beta)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    path = ctrw.simulate(params, t0, n, seed)
    out = _outdir(out)
    write_frame(pd.DataFrame({"index": np.arange(1, n + 1), "value": path}), out / "simulation.csv")
    write_csv(make_table(np.arange(start_year, start_year + n), path), out / "series.csv")
    write_manifest(
        out,
        {
            "command": "simulate",
            "model": model,
            "params": {"mu": mu, "tau": tau, "alpha": alpha, "beta": beta},
            "n": n,
            "seed": seed,
            "t0": t0,
            "start_year": start_year,
        },
    )
    click.echo(f"simulated {n} values, range {path.min():.3f} to {path.max():.3f}")


def _need(run: Path, name: str) -> Path:
    path = run / name
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    return path


def _load_entry(run: Path) -> cmp.ModelEntry:
    manifest = read_manifest(run)
    ll_frame = pd.read_csv(_need(run, "loglik.csv"), float_precision="round_trip").drop(columns="draw")
    ll = ll_frame.to_numpy(dtype=float)
    at_mean = pd.read_csv(_need(run, "loglik_mean.csv"), float_precision="round_trip")["loglik"].to_numpy(dtype=float)
    fitted = pd.read_csv(_need(run, "fitted.csv"), float_precision="round_trip")
    skip = int(manifest.get("metric_skip_rows", 0))
    note = ""
    if manifest.get("likelihood_unit") == "increments":
        note = "DIC/LOOIC on increments; RMSE/MAE on one-step-ahead levels (first year excluded)"
    return cmp.ModelEntry(
        label=manifest.get("model", run.name),
        loglik=ll,
        loglik_at_mean=at_mean,
        observed=fitted["observed"].to_numpy()[skip:],
        fitted=fitted["fit_mean"].to_numpy()[skip:],
        fit_description=manifest.get("fit_description", ""),
        note=note,
        observation_labels=list(ll_frame.columns),
    )


@cli.command("compare")
@click.option("--runs", required=True, multiple=True, type=click.Path(file_okay=False), help="Fit run directories.")
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Defaults to the first run's parent.")
@click.argument("more_runs", nargs=-1, type=click.Path(file_okay=False))
def compare_cmd(runs, out, more_runs):
    """DIC, LOOIC, RMSE and MAE for fitted runs.

    ``--runs a b`` and ``--runs a --runs b`` are equivalent.
    """
    paths = []
    for r in (*runs, *more_runs):
        paths.extend(r.split(",") if "," in r else [r])
    dirs = [Path(p) for p in paths]
    for d in dirs:
        if not d.is_dir():
            raise MissingArtifactError(f"missing run directory: {d}")
    report = cmp.compare([_load_entry(d) for d in dirs])
    out = _outdir(out) if out else dirs[0].resolve().parent
    write_frame(report.table, out / "compare.csv")
    write_frame(report.loo_frame(), out / "loo.csv")
    write_manifest(out, {"command": "compare", "runs": [str(d) for d in dirs]})
    click.echo(report.render())


@cli.command()
@click.option("--run", required=True, type=click.Path(file_okay=False))
def diagnose(run):
    """Recompute R-hat, ESS and posterior summaries from draws.csv."""
    run = Path(run)
    names, samples = mcmc.read_draws_csv(_need(run, "draws.csv"))
    table = mcmc.diagnose(samples, names)
    click.echo(f"{samples.shape[0]} chains x {samples.shape[1]} draws")
    click.echo(table.to_string(float_format=lambda v: f"{v:.4g}"))
    bad = table.index[table["rhat"] > 1.05].tolist()
    click.echo(f"R-hat above 1.05: {bad}" if bad else "all R-hat <= 1.05")


def emit_plot_data(run) -> list:
    """Write the data behind each figure type for a fit run; returns file names."""
    run = Path(run)
    manifest = read_manifest(run)
    fitted = pd.read_csv(_need(run, "fitted.csv"), float_precision="round_trip")
    written = []

    def emit(df, name):
        write_frame(df, run / name)
        written.append(name)

    emit(fitted[["year", "observed"]], "plot_trend.csv")
    emit(fitted[["year", "observed", "fit_mean"]].rename(columns={"fit_mean": "fitted"}), "plot_overlay.csv")
    emit(fitted[["year", "fit_mean", "lo95", "hi95"]], "plot_band.csv")
    emit(fitted[["observed", "fit_mean"]].rename(columns={"fit_mean": "predicted"}), "plot_obs_vs_pred.csv")
    src = manifest.get("input")
    if src and Path(src).exists():
        table = load_csv(src, manifest.get("column_map"), allow_seasonal_exceed=manifest.get("allow_seasonal_exceed", False))
        if table.has_seasons and not any(np.isnan(table.column(c)).any() for c in COLUMNS):
            write_matrix_csv(correlation_matrix(table), COLUMNS, run / "plot_correlation.csv")
            written.append("plot_correlation.csv")
    return written


@cli.command("plot-data")
@click.option("--run", required=True, type=click.Path(file_okay=False))
def plot_data(run):
    """Emit plot-ready CSVs (trend, overlay, band, observed-vs-predicted, correlation)."""
    for name in emit_plot_data(run):
        click.echo(name)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="tmaxbayes", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (NumericalError, TmaxError, FloatingPointError) as exc:
        click.echo(f"numerical error: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other runtime failure
        click.echo(f"runtime error: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
