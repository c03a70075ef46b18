"""
Tests for the run_experiment command-line entry point.
"""

import importlib.util
import sys
import types
from pathlib import Path

import pytest

from src.errors import EXIT_CONFIG, EXIT_OK, EXIT_RESONANCE
from src.output import read_csv

SCRIPT = Path(__file__).parent.parent / "scripts" / "run_experiment.py"


def load_script():
    spec = importlib.util.spec_from_file_location("run_experiment", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture(scope="module")
def cli():
    return load_script()


def parse(cli, tmp_path, *argv):
    return cli.build_parser().parse_args(["--defaults", str(tmp_path / "missing.yaml"), *argv])


class TestCommandLine:
    """Test cases for subcommands and exit codes."""

    def test_subcommand_per_kind(self, cli, tmp_path):
        args = parse(cli, tmp_path, "rays", "--threads", "4", "--tol", "1e-11")
        assert args.command == "rays"
        assert args.threads == 4
        assert args.tol == pytest.approx(1e-11)
        assert args.config is None

    def test_unknown_subcommand(self, cli, tmp_path):
        with pytest.raises(SystemExit):
            parse(cli, tmp_path, "tournament")

    def test_design_dump(self, cli, tmp_path):
        out = tmp_path / "out"
        code = cli.run(parse(cli, tmp_path, "design-dump", "--out", str(out)))
        assert code == EXIT_OK
        assert len(read_csv(out / "design-dump.profile.csv")) == 50
        assert (out / "design-dump.manifest.json").exists()

    def test_validate_rejects_bad_radius(self, cli, tmp_path, capsys):
        config = tmp_path / "bad.yaml"
        config.write_text("kind: dn-spectrum\nparameters:\n  R: 2.5\n")
        code = cli.run(parse(cli, tmp_path, "validate", "--config", str(config)))
        assert code == EXIT_CONFIG
        assert "(1, 2)" in capsys.readouterr().err

    def test_validate_prints_warning(self, cli, tmp_path, capsys):
        config = tmp_path / "trap.yaml"
        config.write_text("kind: quantum-converge\nparameters:\n  E: 20.19\n  l_max: 0\n")
        code = cli.run(parse(cli, tmp_path, "validate", "--config", str(config)))
        assert code == EXIT_OK
        assert "Warning:" in capsys.readouterr().out

    def test_resonance_exit_code(self, cli, tmp_path):
        config = tmp_path / "trap.yaml"
        config.write_text("kind: quantum-converge\nparameters:\n  E: 20.19\n  l_max: 0\n  n_list: [4]\n")
        code = cli.run(parse(cli, tmp_path, "quantum-converge", "--config", str(config), "--out", str(tmp_path)))
        assert code == EXIT_RESONANCE

    def test_unknown_method_exit_code(self, cli, tmp_path):
        config = tmp_path / "bad.yaml"
        config.write_text("kind: dn-spectrum\nparameters:\n  method: bogus\n")
        code = cli.run(parse(cli, tmp_path, "dn-spectrum", "--config", str(config), "--out", str(tmp_path)))
        assert code == EXIT_CONFIG
        assert not (tmp_path / "dn-spectrum.manifest.json").exists()


class TestEnvironment:
    """Test cases for loading .env settings at startup."""

    def test_parser_without_dotenv(self, monkeypatch, tmp_path):
        monkeypatch.setitem(sys.modules, "dotenv", None)
        module = load_script()
        assert parse(module, tmp_path, "design-dump").command == "design-dump"

    def test_main_loads_dotenv(self, monkeypatch, tmp_path):
        calls = []
        monkeypatch.setitem(sys.modules, "dotenv", types.SimpleNamespace(load_dotenv=lambda: calls.append(True)))
        config = tmp_path / "dump.yaml"
        config.write_text("kind: design-dump\n")
        monkeypatch.setattr(sys, "argv", ["run_experiment.py", "--defaults", str(tmp_path / "missing.yaml"),
                                          "validate", "--config", str(config)])
        with pytest.raises(SystemExit) as exc:
            load_script().main()
        assert exc.value.code == EXIT_OK
        assert calls == [True]
