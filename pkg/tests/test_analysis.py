"""
Tests for sweep analysis and run reports.
"""

import json
import math

import pandas as pd
import pytest

from src.analysis import (
    RunAnalyzer,
    error_summary,
    is_monotone_decreasing,
    load_manifests,
    monotonicity_table,
    peak_table,
    ray_summary,
)


@pytest.fixture
def sweep():
    """Error table over R for two degrees; l=2 bumps up at R=1.1."""
    return pd.DataFrame({
        "R": [1.5, 1.25, 1.1, 1.5, 1.25, 1.1],
        "l": [1, 1, 1, 2, 2, 2],
        "error": [1e-2, 1e-3, 1e-4, 1e-3, 1e-4, 2e-4],
        "status": ["ok", "ok", "ok", "ok", "ok", "resonance"],
    })


class TestMonotonicity:
    """Test cases for monotone decrease checks."""

    def test_sequences(self):
        assert is_monotone_decreasing([3.0, 2.0, 2.0, 1.0])
        assert not is_monotone_decreasing([3.0, 2.0, 2.0, 1.0], strict=True)
        assert not is_monotone_decreasing([1.0, 2.0])
        assert is_monotone_decreasing([1.0, 1.0 + 1e-13], slack=1e-12)
        assert is_monotone_decreasing([2.0, math.nan, 1.0])

    def test_table_per_degree(self, sweep):
        table = monotonicity_table(sweep, "l", "R")
        assert list(table.columns) == ["l", "first", "last", "reduction", "monotone"]
        by_degree = table.set_index("l")
        assert bool(by_degree.loc[1, "monotone"])
        assert not bool(by_degree.loc[2, "monotone"])
        assert by_degree.loc[1, "reduction"] == pytest.approx(100.0)

    def test_ascending_order(self):
        frame = pd.DataFrame({"n": [16, 4, 8], "l": [0, 0, 0], "error": [1e-4, 1e-2, 1e-3]})
        table = monotonicity_table(frame, "l", "n", ascending=True)
        assert bool(table["monotone"].iloc[0])
        assert table["first"].iloc[0] == pytest.approx(1e-2)


class TestSummaries:
    """Test cases for error, peak and ray summaries."""

    def test_error_summary(self, sweep):
        summary = error_summary(sweep, "R").set_index("R")
        assert summary.loc[1.5, "max_error"] == pytest.approx(1e-2)
        assert summary.loc[1.5, "mean_error"] == pytest.approx(5.5e-3)
        assert summary.loc[1.1, "resonant"] == 1

    def test_peak_table(self):
        curve = pd.DataFrame({"energy": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
                              "ratio": [1.0, 1.0, 9.0, 1.0, 1.0, 3.0, 1.0]})
        peaks = peak_table(curve)
        assert list(peaks["energy"]) == [3.0, 6.0]
        assert peaks["prominence"].iloc[0] == pytest.approx(9.0)
        assert len(peak_table(curve, top=1)) == 1

    def test_flat_curve_has_no_peaks(self):
        curve = pd.DataFrame({"energy": [1.0, 2.0, 3.0], "ratio": [1.0, 1.0, 1.0]})
        assert peak_table(curve).empty

    def test_ray_summary(self):
        compare = pd.DataFrame({
            "reason": ["exited", "exited", "tangency_guard"],
            "length_error": [1e-8, 3e-8, math.nan],
            "exit_error": [2e-9, 1e-9, math.nan],
            "hamiltonian_drift": [1e-10, 2e-10, 5e-10],
            "flagged": [False, False, True],
        })
        summary = ray_summary(compare)
        assert summary["rays"] == 3
        assert summary["exited"] == 2
        assert summary["flagged"] == 1
        assert summary["max_length_error"] == pytest.approx(3e-8)
        assert summary["max_hamiltonian_drift"] == pytest.approx(5e-10)


class TestReport:
    """Test cases for the run report and manifest loading."""

    @pytest.fixture
    def manifest(self):
        return {
            "kind": "cloak-converge",
            "version": "1.0.0",
            "status": "ok",
            "stages": [{"name": "dn-errors", "status": "ok", "seconds": 1.25}],
            "files": [{"path": "cloak-converge.errors.csv", "format": "csv", "rows": 20}],
        }

    def test_generate_report(self, manifest, sweep):
        report = RunAnalyzer().generate_report(manifest, {"errors by R": error_summary(sweep, "R"),
                                                          "rays": {"rays": 0}})
        assert "CLOAKING TOOLKIT - CLOAK-CONVERGE" in report
        assert "cloak-converge.errors.csv  (20 rows)" in report
        assert "ERRORS BY R" in report
        assert "max_error" in report

    def test_empty_summary_table(self, manifest):
        report = RunAnalyzer().generate_report(manifest, {"peaks": pd.DataFrame(columns=["energy"])})
        assert "(empty)" in report

    def test_load_manifests(self, tmp_path, manifest):
        (tmp_path / "nested").mkdir()
        (tmp_path / "nested" / "a.manifest.json").write_text(json.dumps(manifest))
        (tmp_path / "broken.manifest.json").write_text("{")
        (tmp_path / "a.errors.csv").write_text("R[length]\n1.5\n")
        loaded = load_manifests(str(tmp_path))
        assert len(loaded) == 1
        assert loaded[0]["_filename"] == "nested/a.manifest.json"

    def test_missing_directory(self, tmp_path):
        assert load_manifests(str(tmp_path / "nowhere")) == []
