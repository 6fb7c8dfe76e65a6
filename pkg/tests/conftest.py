import numpy as np
import pytest

from tmaxbayes.mcmc import McmcConfig

HEADER = "YEAR,ANNUAL,JAN-FEB,MAR-MAY,JUN-SEP,OCT-DEC\n"


@pytest.fixture
def csv_file(tmp_path):
    """Write raw CSV text into tmp_path and return the path."""

    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def seasonal_rows(n=40, seed=0, start=1901):
    rng = np.random.default_rng(seed)
    years = np.arange(start, start + n)
    base = 33.0 + 0.01 * np.arange(n) + 0.3 * rng.standard_normal(n)
    seasons = [base - 4.0 + 0.3 * rng.standard_normal(n) for _ in range(4)]
    seasons = [np.minimum(s, base) for s in seasons]
    return years, base, seasons


def seasonal_csv_text(n=40, seed=0):
    years, annual, seasons = seasonal_rows(n, seed)
    lines = [HEADER]
    for i, yr in enumerate(years):
        vals = [annual[i]] + [s[i] for s in seasons]
        lines.append(f"{yr}," + ",".join(repr(float(v)) for v in vals) + "\n")
    return "".join(lines)


@pytest.fixture
def short_config():
    return McmcConfig(chains=2, iterations=600, burn_in=200, thin=2, seed=1, init_jitter=0.1)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def _report(number, title, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if bool(ok) else "FAIL")
        line = f"criterion {number:>2} {status}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
