"""
Tests for atomic writers, unit headers and schema validation.
"""

import json
import math

import pandas as pd
import pytest

from src.errors import OutputError
from src.output import (
    SCHEMA_VERSION,
    read_csv,
    unit_header,
    validate_document,
    write_csv,
    write_json,
)


class TestCsv:
    """Test cases for CSV tables."""

    def test_unit_headers(self, tmp_path):
        frame = pd.DataFrame({"R": [1.5], "l": [0], "error": [1e-3]})
        path = write_csv(frame, tmp_path / "sweep.csv")
        header = path.read_text().splitlines()[0]
        assert header == "R[length],l[1],error[1]"

    def test_custom_units(self):
        assert unit_header("speed", {"speed": "m/s"}) == "speed[m/s]"
        assert unit_header("energy") == "energy[energy]"

    def test_full_precision(self, tmp_path):
        value = 1.0 / 3.0
        path = write_csv(pd.DataFrame({"x": [value]}), tmp_path / "x.csv")
        assert float(path.read_text().splitlines()[1]) == value

    def test_read_strips_units(self, tmp_path):
        frame = pd.DataFrame({"r": [0.5, 1.5], "bulk": [8.0, 0.8888888888888888]})
        path = write_csv(frame, tmp_path / "profile.csv")
        back = read_csv(path)
        assert list(back.columns) == ["r", "bulk"]
        assert back["bulk"].iloc[1] == frame["bulk"].iloc[1]

    def test_empty_table_writes_header(self, tmp_path):
        path = write_csv(pd.DataFrame(columns=["ray", "impact"]), tmp_path / "empty.csv")
        assert path.read_text() == "ray[1],impact[length]\n"

    def test_no_temporary_files_left(self, tmp_path):
        write_csv(pd.DataFrame({"x": [1.0]}), tmp_path / "out" / "x.csv")
        assert [p.name for p in (tmp_path / "out").iterdir()] == ["x.csv"]

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        with pytest.raises(OutputError):
            write_csv(pd.DataFrame({"x": [1.0]}), blocker / "x.csv")


class TestJson:
    """Test cases for JSON documents and schemas."""

    @pytest.fixture
    def spectrum(self):
        return {
            "profile": "ideal-cloak",
            "quantity": "omega",
            "frequency": 0.5,
            "spectrum": [{"l": 0, "lambda": -0.17895}, {"l": 1, "lambda": 0.4}],
        }

    def test_schema_tagging(self, tmp_path, spectrum):
        path = write_json(spectrum, tmp_path / "s.json", schema="spectrum")
        data = json.loads(path.read_text())
        assert data["schema"] == "spectrum"
        assert data["schema_version"] == SCHEMA_VERSION

    def test_sorted_keys(self, tmp_path):
        path = write_json({"b": 1, "a": 2}, tmp_path / "plain.json")
        assert list(json.loads(path.read_text())) == ["a", "b"]

    def test_non_finite_becomes_null(self, tmp_path):
        path = write_json({"value": math.nan, "inf": math.inf}, tmp_path / "nan.json")
        assert json.loads(path.read_text()) == {"value": None, "inf": None}

    def test_invalid_document_rejected(self, tmp_path):
        with pytest.raises(OutputError):
            write_json({"profile": "x"}, tmp_path / "bad.json", schema="spectrum")
        assert not (tmp_path / "bad.json").exists()

    def test_validate_document(self, spectrum):
        validate_document({"schema": "spectrum", "schema_version": SCHEMA_VERSION, **spectrum}, "spectrum")
