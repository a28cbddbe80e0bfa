"""
Tests for padesum.cli: commands, output files and exit codes.

Run with:
    pytest tests/test_cli.py -v
"""

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from padesum.cli import (  # noqa: E402
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    main,
    parse_complex,
    parse_law,
    parse_range,
    read_csv_manifest,
)
from padesum.expsum import ApproxConfig, approximate, load_expsum  # noqa: E402
from padesum.targets import get_target  # noqa: E402

HOCKEY = ["--target", "hockey_stick", "--M", "5", "--ninf", "2", "--A", "0.5", "--B", "8.5"]


def write_sum(path, terms, digits=40):
    """Coefficient file from (c_re, c_im, l_re, l_im) string tuples."""
    path.write_text(
        json.dumps(
            {
                "M": len(terms),
                "digits": digits,
                "terms": [dict(zip(("c_re", "c_im", "l_re", "l_im"), t)) for t in terms],
            }
        )
    )
    return path


# =============================================================================
# Fixtures
# =============================================================================

@pytest.fixture
def hockey_file(tmp_path, fast_config):
    """Five-term hockey-stick coefficients written by the approx command."""
    out = tmp_path / "h5.json"
    assert main(["approx", *HOCKEY, "--config", str(fast_config), "--out", str(out), "--quiet"]) == EXIT_OK
    return out


# =============================================================================
# Argument helpers
# =============================================================================

class TestArgumentParsing:
    """Flag value parsers."""

    def test_range(self):
        """lo:hi:step is inclusive and kept as decimal text."""
        assert parse_range("0.5:1.5:0.5") == ["0.5", "1.0", "1.5"]
        assert parse_range("3") == ["3"]

    def test_empty_range(self):
        """lo > hi is a usage error."""
        with pytest.raises(UsageError):
            parse_range("2:1:0.5")

    def test_complex(self):
        """'re,im' and a bare real part."""
        z = parse_complex("2,-1.5")
        assert (float(z.real), float(z.imag)) == (2.0, -1.5)
        assert parse_complex("3").imag == 0

    def test_law(self):
        """Only exp and gamma laws are known."""
        assert parse_law("exp:2") is not None
        assert parse_law("gamma:2,1") is not None
        with pytest.raises(UsageError):
            parse_law("weibull:1")


# =============================================================================
# approx
# =============================================================================

class TestApproxCommand:
    """padesum approx."""

    def test_writes_coefficients(self, hockey_file):
        """The JSON file carries five terms and its manifest."""
        data = json.loads(hockey_file.read_text())
        assert data["M"] == 5
        assert len(data["terms"]) == 5
        assert data["config"] == {"M": 5, "n_inf": 2, "A": "0.5", "B": "8.5"}
        assert data["manifest"]["command"] == "approx"
        assert data["manifest"]["target"] == "hockey_stick"

    def test_summary_line(self, tmp_path, fast_config, capsys):
        """The error summary goes to standard output."""
        out = tmp_path / "h5.json"
        code = main(["approx", *HOCKEY, "--config", str(fast_config), "--out", str(out)])
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        assert "L1=" in stdout and "Linf=" in stdout and "maxc=" in stdout

    def test_file_matches_memory(self, hockey_file):
        """Re-loading the file reproduces the in-memory coefficients exactly."""
        cfg = ApproxConfig(M=5, n_inf=2, A="0.5", B="8.5", digits=40)
        s, _ = approximate(get_target("hockey_stick"), cfg, n_grid=200, metrics_digits=32)
        assert load_expsum(hockey_file).terms == s.terms

    def test_missing_target(self, fast_config):
        """--target is required."""
        with pytest.raises(SystemExit) as excinfo:
            main(["approx", "--M", "3", "--ninf", "4", "--A", "1", "--B", "1", "--config", str(fast_config)])
        assert excinfo.value.code == EXIT_USAGE

    def test_unknown_target(self, fast_config):
        """An unregistered target is a usage error."""
        code = main(["approx", "--target", "cauchy", "--M", "3", "--ninf", "2", "--A", "1", "--B", "1",
                     "--config", str(fast_config)])
        assert code == EXIT_USAGE

    def test_low_precision(self, fast_config):
        """Fewer than 32 digits is refused."""
        code = main(["approx", *HOCKEY, "--digits", "20", "--config", str(fast_config)])
        assert code == EXIT_USAGE

    def test_bad_param(self, fast_config):
        """--param needs key=value."""
        code = main(["approx", *HOCKEY, "--param", "sigma", "--config", str(fast_config)])
        assert code == EXIT_USAGE


# =============================================================================
# error
# =============================================================================

class TestErrorCommand:
    """padesum error."""

    def test_csv(self, hockey_file, tmp_path, fast_config, capsys):
        """x, f, phi, err columns on n + 1 points, manifest first."""
        out = tmp_path / "err.csv"
        code = main(["error", "--coeffs", str(hockey_file), "--target", "hockey_stick", "--n", "50",
                     "--out", str(out), "--config", str(fast_config)])
        assert code == EXIT_OK
        manifest = read_csv_manifest(out)
        assert manifest["command"] == "error"
        assert manifest["inputs"] == [str(hockey_file)]
        frame = pd.read_csv(out, skiprows=1)
        assert list(frame.columns) == ["x", "f", "phi", "err"]
        assert len(frame) == 51
        assert frame["x"].iloc[-1] == pytest.approx(4.0)
        assert (frame["err"] - (frame["f"] - frame["phi"])).abs().max() < 1e-12
        assert "max|err|=" in capsys.readouterr().out

    def test_logx(self, hockey_file, tmp_path, fast_config):
        """--logx adds a monotone ln(x) column."""
        out = tmp_path / "err_log.csv"
        code = main(["error", "--coeffs", str(hockey_file), "--target", "hockey_stick", "--n", "40",
                     "--logx", "--out", str(out), "--config", str(fast_config)])
        assert code == EXIT_OK
        frame = pd.read_csv(out, skiprows=1)
        assert "ln_x" in frame.columns
        assert frame["ln_x"].is_monotonic_increasing
        assert frame["x"].iloc[0] == pytest.approx(1e-8)

    def test_missing_coefficients(self, tmp_path, fast_config):
        """An unreadable coefficient file is a numerical-failure exit."""
        code = main(["error", "--coeffs", str(tmp_path / "absent.json"), "--target", "hockey_stick",
                     "--out", str(tmp_path / "e.csv"), "--config", str(fast_config)])
        assert code == EXIT_NUMERIC


# =============================================================================
# sweep
# =============================================================================

class TestSweepCommand:
    """padesum sweep."""

    def test_single_point(self, tmp_path, fast_config, capsys):
        """A 1x1 grid names its only point as the winner."""
        table = tmp_path / "sweep.csv"
        winner = tmp_path / "winner.json"
        code = main(["sweep", "--target", "hockey_stick", "--M", "5", "--ninf", "2", "--A", "0.5",
                     "--B", "8.5", "--table", str(table), "--out", str(winner), "--config", str(fast_config)])
        assert code == EXIT_OK
        assert "winner: A=0.5 B=8.5" in capsys.readouterr().out
        frame = pd.read_csv(table, skiprows=1)
        assert len(frame) == 1
        assert frame["status"].iloc[0] == "ok"
        assert read_csv_manifest(table)["command"] == "sweep"
        assert json.loads(winner.read_text())["M"] == 5

    def test_empty_range(self, fast_config):
        """lo > hi exits with a usage error."""
        code = main(["sweep", "--target", "hockey_stick", "--M", "5", "--ninf", "2", "--A", "2:1:0.5",
                     "--B", "8.5", "--config", str(fast_config)])
        assert code == EXIT_USAGE

    def test_bad_objective(self, fast_config):
        """Unknown objectives are usage errors."""
        code = main(["sweep", "--target", "hockey_stick", "--M", "5", "--ninf", "2", "--A", "0.5",
                     "--B", "8.5", "--objective", "l7", "--config", str(fast_config)])
        assert code == EXIT_USAGE


# =============================================================================
# gamma, cdf and info
# =============================================================================

class TestGammaCommand:
    """padesum gamma."""

    def test_domain(self, tmp_path, fast_config):
        """Re z below 3/2 exits with a usage error."""
        coeffs = write_sum(tmp_path / "empty.json", [])
        code = main(["gamma", "--coeffs", str(coeffs), "--z", "1", "--config", str(fast_config)])
        assert code == EXIT_USAGE

    def test_bare_formula(self, tmp_path, fast_config, capsys):
        """With no terms ln Gamma(3/2) is still close to ln(sqrt(pi)/2)."""
        coeffs = write_sum(tmp_path / "empty.json", [])
        code = main(["gamma", "--coeffs", str(coeffs), "--z", "1.5,0", "--config", str(fast_config)])
        assert code == EXIT_OK
        value = float(capsys.readouterr().out.strip().splitlines()[0])
        assert value == pytest.approx(-0.1207822376352452, abs=1e-2)


class TestCdfCommand:
    """padesum cdf."""

    def test_exponential_law(self, tmp_path, fast_config, capsys):
        """phi = exp(-x) and X ~ Exp(1) give u/(u + 1)."""
        coeffs = write_sum(tmp_path / "one.json", [("1", "0", "1", "0")])
        code = main(["cdf", "--coeffs", str(coeffs), "--law", "exp:1", "--u", "3", "1",
                     "--config", str(fast_config)])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("u=3 P=0.75")
        assert lines[1].startswith("u=1 P=0.5")

    def test_unknown_law(self, tmp_path, fast_config):
        """An unsupported law is a usage error."""
        coeffs = write_sum(tmp_path / "one.json", [("1", "0", "1", "0")])
        code = main(["cdf", "--coeffs", str(coeffs), "--law", "pareto:2", "--u", "1",
                     "--config", str(fast_config)])
        assert code == EXIT_USAGE


class TestInfoCommand:
    """padesum info."""

    def test_lists_targets(self, fast_config, capsys):
        """Every registered target appears."""
        assert main(["info", "--config", str(fast_config)]) == EXIT_OK
        stdout = capsys.readouterr().out
        for name in ("gaussian", "gamma_kernel", "gompertz_makeham", "lognormal_survival", "hockey_stick"):
            assert name in stdout
