"""Command-line interface: dispatch, artifacts, exit-status contract."""

import pytest
from click.testing import CliRunner

from eqlattice.cli import main
from eqlattice.config import dumps
from eqlattice.experiments import scenario

BAD_RHO_TOML = dumps(scenario("fig3_4_5_eq_vs_indiff")).replace(
    "rho = 0.5", "rho = 1.0"
)


@pytest.fixture
def runner():
    return CliRunner()


class TestSolve:
    def test_builtin_scenario(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["solve", "--scenario", "fig3_4_5_eq_vs_indiff", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        files = {p.name for p in tmp_path.iterdir()}
        assert "fig3_4_5_eq_vs_indiff_consistent.csv" in files
        assert "fig3_4_5_eq_vs_indiff_inconsistent.csv" in files

    def test_mode_selector(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "solve",
                "--scenario",
                "fig6_gamma_sweep",
                "--mode",
                "consistent",
                "--out",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0
        assert len(list(tmp_path.iterdir())) == 1

    def test_scenario_file(self, runner, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text(dumps(scenario("fig6_gamma_sweep")))
        result = runner.invoke(
            main, ["solve", "--scenario", str(path), "--out", str(tmp_path)]
        )
        assert result.exit_code == 0

    def test_invalid_config_exits_2(self, runner, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(BAD_RHO_TOML)
        result = runner.invoke(
            main, ["solve", "--scenario", str(path), "--out", str(tmp_path)]
        )
        assert result.exit_code == 2
        assert "error_code: ConfigError" in result.output

    def test_path_cap_exits_2(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "solve",
                "--scenario",
                "fig8_two_period",
                "--path-cap",
                "10",
                "--out",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 2
        assert "error_code: ResourceLimitError" in result.output

    def test_missing_file_exits_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["solve", "--scenario", "no_such.toml", "--out", str(tmp_path)]
        )
        assert result.exit_code == 2


class TestVerify:
    def test_passing_scenario_exits_0(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["verify", "--scenario", "fig3_4_5_eq_vs_indiff", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        assert "passed: True" in result.output
        assert (tmp_path / "verify_fig3_4_5_eq_vs_indiff.csv").exists()


class TestFigure:
    def test_emits_csv_provenance_and_png(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["figure", "--figure", "fig6", "--out", str(tmp_path), "--no-verify"],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "fig6.csv").exists()
        assert (tmp_path / "fig6.provenance.txt").exists()
        assert (tmp_path / "fig6.png").stat().st_size > 0

    def test_byte_identical_reruns(self, runner, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        for out in (a_dir, b_dir):
            result = runner.invoke(
                main,
                ["figure", "--figure", "fig8", "--out", str(out), "--no-verify"],
            )
            assert result.exit_code == 0, result.output
        assert (a_dir / "fig8.csv").read_bytes() == (b_dir / "fig8.csv").read_bytes()

    def test_gamma_shift_recorded(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "figure",
                "--figure",
                "fig9",
                "--gamma-shift",
                "0.2",
                "--out",
                str(tmp_path),
                "--no-verify",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "gamma_shift: 0.2" in (tmp_path / "fig9.provenance.txt").read_text()

    def test_unknown_figure_exits_2(self, runner, tmp_path):
        result = runner.invoke(
            main, ["figure", "--figure", "fig42", "--out", str(tmp_path)]
        )
        assert result.exit_code == 2

    def test_out_env_variable(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("EQLATTICE_OUT", str(tmp_path / "envout"))
        result = runner.invoke(
            main, ["figure", "--figure", "fig2", "--no-verify"]
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "envout" / "fig2.csv").exists()


class TestCsvFormat:
    def test_float_rendering(self):
        from eqlattice.output import fmt

        assert fmt(0.25) == "2.5000000000000000e-01"
        assert fmt(1) == "1"
        assert fmt("x") == "x"

    def test_solution_csv_contains_kernels(self, runner, tmp_path):
        runner.invoke(
            main,
            [
                "solve",
                "--scenario",
                "fig6_gamma_sweep",
                "--mode",
                "consistent",
                "--out",
                str(tmp_path),
            ],
        )
        text = (tmp_path / "fig6_gamma_sweep_consistent.csv").read_text()
        header = text.splitlines()[0]
        assert "child_kernels" in header
        assert ";" in text.splitlines()[1]
