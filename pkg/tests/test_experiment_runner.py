"""
Tests for experiment configuration, validation and runs.
"""

import json

import pytest

from src.errors import ConfigError, EXIT_CONFIG, EXIT_RESONANCE, PreconditionError, exit_code_for
from src.experiment_runner import DEFAULT_PARAMETERS, KINDS, ExperimentConfig, ExperimentRunner
from src.output import read_csv
from src.radial import bases, eigen


@pytest.fixture
def runner(tmp_path):
    """Runner without repository defaults."""
    return ExperimentRunner(str(tmp_path / "missing.yaml"), configure_logging=False)


def write_experiment(path, text):
    path.write_text(text)
    return str(path)


class TestExperimentConfig:
    """Test cases for building and validating configs."""

    def test_defaults_resolved(self, tmp_path):
        config = ExperimentConfig.from_mapping({"kind": "cloak-converge"}, overrides={"output_dir": str(tmp_path)})
        assert config.name == "cloak-converge"
        assert config.parameters == DEFAULT_PARAMETERS["cloak-converge"]
        assert config.threads == 1
        assert config.tol == pytest.approx(1e-10)

    def test_repository_defaults_then_file_then_overrides(self, tmp_path):
        defaults = {"run": {"threads": 2, "tol": 1e-9}, "experiments": {"rays": {"count": 7}}}
        data = {"kind": "rays", "parameters": {"t_max": 50.0}, "run": {"tol": 1e-11}}
        config = ExperimentConfig.from_mapping(data, defaults, {"threads": 4, "output_dir": str(tmp_path)})
        assert config.parameters["count"] == 7
        assert config.parameters["t_max"] == 50.0
        assert config.tol == pytest.approx(1e-11)
        assert config.threads == 4

    def test_output_dir_from_environment(self, monkeypatch):
        monkeypatch.setenv("CLOAKING_OUTPUT_DIR", "env-output")
        config = ExperimentConfig.from_mapping({"kind": "design-dump"})
        assert config.output_dir == "env-output"

    def test_rejects_radius_outside_interval(self):
        with pytest.raises(ConfigError, match=r"\(1, 2\)") as exc:
            ExperimentConfig.from_mapping({"kind": "dn-spectrum", "parameters": {"R": 2.5}},
                                          lines={"parameters.R": 4})
        assert exc.value.field == "R"
        assert exc.value.line == 4
        assert exit_code_for(exc.value) == EXIT_CONFIG

    def test_rejects_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown experiment kind"):
            ExperimentConfig.from_mapping({"kind": "tournament"})

    def test_rejects_unknown_parameter(self):
        with pytest.raises(ConfigError, match="unknown parameter"):
            ExperimentConfig.from_mapping({"kind": "rays", "parameters": {"players": 4}})

    @pytest.mark.parametrize("parameters", [
        {"n_list": [4, 0]},
        {"l_max": -1},
        {"E": "high"},
    ])
    def test_rejects_bad_quantum_values(self, parameters):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({"kind": "quantum-converge", "parameters": parameters})

    def test_rejects_bad_run_settings(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({"kind": "rays"}, overrides={"threads": 0})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({"kind": "rays"}, overrides={"tol": -1.0})

    @pytest.mark.parametrize("kind, parameters, field", [
        ("dn-spectrum", {"method": "bogus"}, "method"),
        ("cloak-converge", {"method": "rk4"}, "method"),
        ("rays", {"t_max": 0.0}, "t_max"),
        ("rays", {"exit_radius": -4.0}, "exit_radius"),
        ("rays", {"start_x": "left"}, "start_x"),
        ("rays", {"random": "yes"}, "random"),
        ("wormhole-rays", {"impacts": [0.0, "wide"]}, "impacts"),
        ("wormhole-rays", {"impacts": 0.5}, "impacts"),
        ("wormhole-rays", {"start_z": float("nan")}, "start_z"),
        ("wormhole-rays", {"r_min": 0.0}, "r_min"),
        ("wormhole-rays", {"handle_length": 0.0}, "handle_length"),
    ])
    def test_rejects_bad_solver_and_ray_fields(self, kind, parameters, field):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_mapping({"kind": kind, "parameters": parameters})
        assert exc.value.field == field

    def test_every_kind_has_defaults(self):
        for kind in KINDS:
            ExperimentConfig.from_mapping({"kind": kind})


class TestValidate:
    """Test cases for the validate dry run."""

    def test_reports_line_of_bad_field(self, runner, tmp_path):
        path = write_experiment(tmp_path / "bad.yaml", "kind: dn-spectrum\nparameters:\n  R: 2.5\n")
        report = runner.validate(path)
        assert not report.ok
        assert "line 3" in report.errors[0]

    def test_reports_parse_error(self, runner, tmp_path):
        path = write_experiment(tmp_path / "broken.yaml", "kind: rays\nparameters: [1, 2\n")
        report = runner.validate(path)
        assert not report.ok

    def test_trapped_energy_warning(self, runner, tmp_path):
        path = write_experiment(tmp_path / "trap.yaml",
                                "kind: quantum-converge\nparameters:\n  E: 20.19\n  l_max: 0\n")
        report = runner.validate(path)
        assert report.ok
        assert any("trapped-state resonance" in w for w in report.warnings)

    def test_clean_config(self, runner, tmp_path):
        path = write_experiment(tmp_path / "ok.yaml", "kind: quantum-converge\nparameters:\n  E: 1.0\n  l_max: 1\n")
        report = runner.validate(path)
        assert report.ok
        assert report.warnings == []


class TestRuns:
    """Test cases for running experiments end to end."""

    def test_design_dump(self, runner, tmp_path):
        config = runner.load_experiment(None, {"kind": "design-dump", "output_dir": str(tmp_path)})
        manifest = runner.run(config)
        assert manifest.status == "ok"
        table = read_csv(tmp_path / "design-dump.profile.csv")
        row = table.iloc[(table["r"] - 1.5).abs().idxmin()]
        assert row["bulk_squared"] == pytest.approx(0.79012, abs=1e-5)
        saved = json.loads((tmp_path / "design-dump.manifest.json").read_text())
        assert saved["schema"] == "manifest"
        assert saved["files"][0]["path"] == "design-dump.profile.csv"
        assert "DESIGN-DUMP" in runner.last_report

    def test_design_dump_json(self, runner, tmp_path):
        path = write_experiment(tmp_path / "dump.yaml",
                                f"kind: design-dump\nname: layered\noutput:\n  dir: {tmp_path}\n  format: json\n"
                                "parameters:\n  design: layered\n  R: 1.25\n  n: 2\n")
        runner.run(runner.load_experiment(path))
        design = json.loads((tmp_path / "layered.design.json").read_text())
        assert design["schema"] == "design"
        assert len(design["intervals"]) == 5

    def test_dn_spectrum_csv(self, runner, tmp_path):
        config = runner.load_experiment(None, {"kind": "dn-spectrum", "output_dir": str(tmp_path)})
        config.parameters.update({"omega": 0.5, "l_max": 3})
        runner.run(config)
        table = read_csv(tmp_path / "dn-spectrum.spectrum.csv")
        assert list(table.columns) == ["l", "lambda", "lambda_free", "error"]
        assert len(table) == 4

    def test_empty_ray_fan(self, runner, tmp_path):
        path = write_experiment(tmp_path / "rays.yaml", "kind: rays\nparameters:\n  count: 0\n")
        config = runner.load_experiment(path, {"output_dir": str(tmp_path)})
        manifest = runner.run(config)
        assert manifest.status == "ok"
        assert (tmp_path / "rays.compare.csv").read_text().startswith("ray[1],impact[length]")
        assert read_csv(tmp_path / "rays.compare.csv").empty

    def test_data_files_are_deterministic(self, runner, tmp_path):
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            config = runner.load_experiment(None, {"kind": "cloak-converge", "output_dir": str(out), "threads": 2})
            config.parameters.update({"omega": 0.5, "l_max": 1, "R_list": [1.5, 1.1]})
            runner.run(config)
            outputs.append((out / "cloak-converge.errors.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_precondition_failure_writes_failed_manifest(self, runner, tmp_path):
        config = runner.load_experiment(None, {"kind": "quantum-converge", "output_dir": str(tmp_path)})
        config.parameters.update({"E": 20.19, "l_max": 0, "n_list": [4]})
        with pytest.raises(PreconditionError) as exc:
            runner.run(config)
        saved = json.loads((tmp_path / "quantum-converge.manifest.json").read_text())
        assert saved["status"] == "failed"
        assert saved["exit_code"] == EXIT_RESONANCE == exit_code_for(exc.value)

    def test_tolerance_reaches_radial_integration(self, runner, tmp_path, monkeypatch):
        seen = []
        original = bases.solve_ivp

        def recording(*args, **kwargs):
            seen.append((kwargs["rtol"], kwargs["atol"]))
            return original(*args, **kwargs)

        monkeypatch.setattr(bases, "solve_ivp", recording)
        config = runner.load_experiment(None, {"kind": "dn-spectrum", "output_dir": str(tmp_path), "tol": 1e-7})
        config.parameters.update({"method": "ode", "omega": 0.5, "l_max": 1, "R": 1.25})
        runner.run(config)
        assert seen
        for rtol, atol in seen:
            assert rtol == pytest.approx(1e-7)
            assert atol == pytest.approx(1e-9)

    def test_tolerance_reaches_eigenvalue_shooting(self, runner, monkeypatch):
        seen = []
        original = eigen.brentq

        def recording(*args, **kwargs):
            seen.append(kwargs["xtol"])
            return original(*args, **kwargs)

        monkeypatch.setattr(eigen, "brentq", recording)
        report = runner.validate(None, {"kind": "quantum-converge", "tol": 1e-6})
        assert report.ok
        assert seen
        assert all(xtol == pytest.approx(1e-8) for xtol in seen)
