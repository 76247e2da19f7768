"""
Tests for the command line interface and the golden analysis reports.
"""
import json
import pytest
import sys
import os
from fractions import Fraction

import click
from click.testing import CliRunner

# Add the parent directory to the path to import gevreykit
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gevreykit.cli import parse_grid
from gevreykit.main_cli import cli

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SPECS = os.path.join(ROOT, "specs")
GOLDEN = os.path.join(ROOT, "tests", "golden")


def spec_path(name: str) -> str:
    return os.path.join(SPECS, f"{name}.toml")


def stable_view(data):
    """Report fields that do not depend on time, float formatting or wording."""
    view = {key: data[key] for key in (
        "name", "m", "trunc_x", "index_set", "equation_type", "polygon", "lambda0", "lambda1", "p", "d",
        "holomorphic_in_t", "optimality_hypotheses", "predicted_class",
    )}
    conditions = data["conditions"]
    view["N"] = {"holds": conditions["N"]["holds"], "witness": conditions["N"]["witness"]}
    view["GP"] = conditions["GP"]["status"]
    view["R"] = conditions["R"]
    view["indices"] = {key: data["indices"][key] for key in ("sigma0", "s0", "s1")}
    return view


@pytest.fixture
def runner():
    return CliRunner()


class TestAnalyzeCommand:
    """Test gevreykit analyze"""

    @pytest.mark.parametrize("name,code", [("e27", 0), ("e62", 0), ("model_e58", 0), ("resonant", 1)])
    def test_golden_report(self, runner, tmp_path, name, code):
        """Test the JSON report against the stored golden fields"""
        out = str(tmp_path / f"{name}.json")
        result = runner.invoke(cli, ["analyze", spec_path(name), "--no-banner", "--json", out, "--threads", "1"])
        assert result.exit_code == code, result.output
        with open(out, encoding="utf-8") as f:
            data = json.load(f)
        with open(os.path.join(GOLDEN, f"{name}.json"), encoding="utf-8") as f:
            golden = json.load(f)
        assert stable_view(data) == golden
        assert data["report_metadata"]["tool_version"] == "0.1.0"

    def test_summary_and_text_export(self, runner, tmp_path):
        """Test the printed summary and the text report"""
        out = str(tmp_path / "e27")
        result = runner.invoke(cli, ["analyze", spec_path("e27"), "--no-banner", "--txt", out, "--threads", "1"])
        assert result.exit_code == 0, result.output
        assert "INDEX SUMMARY" in result.output
        assert "sigma0 = 2" in result.output
        with open(out + ".txt", encoding="utf-8") as f:
            text = f.read()
        assert "Predicted class: G(2, 2)" in text

    def test_banner(self, runner):
        """Test that the banner is shown unless suppressed"""
        result = runner.invoke(cli, ["analyze", spec_path("e62"), "--threads", "1"])
        assert "Formal Gevrey Index Tool" in result.output
        result = runner.invoke(cli, ["analyze", spec_path("e62"), "--no-banner", "--threads", "1"])
        assert "Formal Gevrey Index Tool" not in result.output

    def test_condition_failure_reported(self, runner):
        """Test that a failing (N) is printed and exits with status 1"""
        result = runner.invoke(cli, ["analyze", spec_path("resonant"), "--no-banner", "--threads", "1"])
        assert result.exit_code == 1
        assert "FAILS" in result.output

    def test_bad_equation_file(self, runner, tmp_path):
        """Test that input errors exit with status 2"""
        path = tmp_path / "bad.toml"
        path.write_text('m = 1\na = ["1"]\n[[linear]]\nj = 3\nalpha = 0\nseries = ["1"]\n')
        result = runner.invoke(cli, ["analyze", str(path), "--no-banner"])
        assert result.exit_code == 2
        assert "Error:" in result.output

    def test_missing_file(self, runner, tmp_path):
        """Test that a missing file is a usage error"""
        result = runner.invoke(cli, ["analyze", str(tmp_path / "absent.toml")])
        assert result.exit_code == 2


class TestSolveCommand:
    """Test gevreykit solve"""

    def test_solve_and_reingest(self, runner, tmp_path):
        """Test CSV export and the residual check on the re-read coefficients"""
        out = str(tmp_path / "u.csv")
        result = runner.invoke(cli, ["solve", spec_path("e62"), "--kt", "4", "--lx", "12", "--no-banner",
                                     "--residual-check", "--out", out])
        assert result.exit_code == 0, result.output
        assert "Residual: zero on the trusted region" in result.output
        again = runner.invoke(cli, ["solve", spec_path("e62"), "--from-csv", out, "--residual-check", "--no-banner"])
        assert again.exit_code == 0, again.output
        assert "Rows: t^0 .. t^4, trusted through x^12" in again.output

    def test_tampered_csv(self, runner, tmp_path):
        """Test that a changed coefficient in a user file is an input error"""
        out = tmp_path / "u.csv"
        runner.invoke(cli, ["solve", spec_path("e62"), "--kt", "3", "--lx", "8", "--no-banner", "--out", str(out)])
        lines = out.read_text().splitlines()
        lines[lines.index("1,1,1,1")] = "1,1,2,1"
        out.write_text("\n".join(lines) + "\n")
        result = runner.invoke(cli, ["solve", spec_path("e62"), "--from-csv", str(out), "--residual-check",
                                     "--no-banner"])
        assert result.exit_code == 2
        assert "does not solve" in result.output
        assert "(1,1)" in result.output

    def test_resonance_exit(self, runner):
        """Test that a resonance exits with status 1"""
        result = runner.invoke(cli, ["solve", spec_path("resonant"), "--kt", "3", "--lx", "5", "--no-banner"])
        assert result.exit_code == 1
        assert "L(1,1) = 0" in result.output

    def test_verbose_first_row(self, runner):
        """Test that verbose output shows u_1"""
        result = runner.invoke(cli, ["solve", spec_path("e62"), "--kt", "2", "--lx", "10", "--no-banner", "-v"])
        assert result.exit_code == 0, result.output
        assert "u_1: 0, 1, 1, 2, 6, 24, 120, 720, ..." in result.output


class TestEstimateCommand:
    """Test gevreykit estimate"""

    def test_grid(self, runner, tmp_path):
        """Test the verdict grid and its CSV export"""
        out = str(tmp_path / "grid.csv")
        result = runner.invoke(cli, ["estimate", spec_path("e62"), "--kt", "4", "--lx", "12", "--no-banner",
                                     "--grid", "2+-1,2+-1", "--out", out])
        assert result.exit_code == 0, result.output
        assert "MEMBERSHIP GRID" in result.output
        assert "(predicted 2)" in result.output
        with open(out, encoding="utf-8") as f:
            assert len(f.read().strip().splitlines()) == 1 + 9

    def test_single_membership(self, runner):
        """Test one (s, sigma) verdict line"""
        result = runner.invoke(cli, ["estimate", spec_path("e62"), "--kt", "4", "--lx", "12", "--no-banner",
                                     "--s", "2", "--sigma", "2"])
        assert result.exit_code == 0, result.output
        assert "G(2, 2): " in result.output

    @pytest.mark.parametrize("args", [["--grid", "2,2,2"], ["--grid", "x,1"], ["--rho", "0"]])
    def test_bad_parameters(self, runner, args):
        """Test that bad options exit with status 2"""
        result = runner.invoke(cli, ["estimate", spec_path("e62"), "--kt", "2", "--lx", "8", "--no-banner"] + args)
        assert result.exit_code == 2
        assert "Error:" in result.output


class TestGridParsing:
    """Test 'S±D,SIG±D' grids"""

    def test_plus_minus(self):
        """Test both spellings of the plus-minus sign"""
        assert parse_grid("2±1,3") == ([Fraction(1), Fraction(2), Fraction(3)], [Fraction(3)])
        assert parse_grid("3/2+-1/2, 2+-0") == ([Fraction(1), Fraction(3, 2), Fraction(2)], [Fraction(2)])

    def test_negative_delta(self):
        """Test that the spread must be nonnegative"""
        with pytest.raises(click.BadParameter):
            parse_grid("2±-1,2")


class TestOtherCommands:
    """Test plot, verify and the command group"""

    def test_plot(self, runner):
        """Test the terminal polygon"""
        result = runner.invoke(cli, ["plot", spec_path("e27"), "--no-banner"])
        assert result.exit_code == 0, result.output
        assert "NEWTON POLYGON" in result.output
        assert "●" in result.output

    def test_verify_table(self, runner, tmp_path):
        """Test that verify prints and exports the pass/fail table"""
        out = str(tmp_path / "verify.csv")
        result = runner.invoke(cli, ["verify", "--kt", "6", "--lx", "10", "--grid-n", "8", "--grid", "20",
                                     "--threads", "1", "--no-banner", "--out", out])
        assert result.exit_code == 0, result.output
        assert "checks passed" in result.output
        with open(out, encoding="utf-8") as f:
            assert f.readline().strip() == "fixture,check,expected,actual,provenance,passed"

    def test_version(self, runner):
        """Test --version"""
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.output

    def test_help_lists_commands(self, runner):
        """Test that every subcommand is registered"""
        result = runner.invoke(cli, ["--help"])
        for command in ("analyze", "solve", "estimate", "verify", "plot"):
            assert command in result.output
