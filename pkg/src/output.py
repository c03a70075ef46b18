"""
Atomic data-file writers and output schemas.

Tables go to CSV with a `name[unit]` header row and floats written with 17
significant digits; spectra and manifests go to JSON validated against the
schemas shipped in `schemas/`. Every file is written to a temporary file in
the target directory and renamed into place.
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import jsonschema
import pandas as pd

from .errors import OutputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SCHEMA_VERSION = "1.0"
SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"

# Units of known columns; anything else is dimensionless
COLUMN_UNITS: Dict[str, str] = {
    "r": "length",
    "R": "length",
    "radius": "length",
    "t": "parameter",
    "x": "length",
    "y": "length",
    "z": "length",
    "length": "length",
    "impact": "length",
    "energy": "energy",
    "E": "energy",
    "omega": "1/length",
}

PathLike = Union[str, Path]


def _atomic_write(path: PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", newline="") as f:
                f.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
    logger.debug(f"Wrote {path}")
    return path


def unit_header(column: str, units: Optional[Mapping[str, str]] = None) -> str:
    """Header cell `name[unit]` (unit "1" for dimensionless columns)."""
    unit = (units or {}).get(column, COLUMN_UNITS.get(column, "1"))
    return f"{column}[{unit}]"


def write_csv(frame: pd.DataFrame, path: PathLike, units: Optional[Mapping[str, str]] = None) -> Path:
    """Write a table atomically with unit headers and round-trip float formatting."""
    out = frame.copy()
    out.columns = [unit_header(str(c), units) for c in frame.columns]
    text = out.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return _atomic_write(path, text)


def read_csv(path: PathLike) -> pd.DataFrame:
    """Read a CSV written by write_csv, stripping the unit suffixes from the header."""
    frame = pd.read_csv(path)
    frame.columns = [str(c).split("[", 1)[0] for c in frame.columns]
    return frame


def _json_ready(value: Any) -> Any:
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, Mapping):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _json_ready(value.item())
    return value


def load_schema(name: str) -> Dict[str, Any]:
    schema_path = SCHEMA_DIR / f"{name}.schema.json"
    with open(schema_path, "r") as f:
        return json.load(f)


def validate_document(document: Mapping[str, Any], schema: str) -> None:
    """
    Validate a JSON document against a shipped schema.

    Raises:
        OutputError: the document does not match
    """
    try:
        jsonschema.validate(instance=document, schema=load_schema(schema))
    except jsonschema.ValidationError as e:
        raise OutputError(f"Document does not match schema '{schema}': {e.message}") from e


def write_json(document: Mapping[str, Any], path: PathLike, schema: Optional[str] = None) -> Path:
    """
    Write a JSON document atomically (sorted keys, non-finite floats as null).

    When `schema` is given the document is validated first and tagged with
    the schema name and version.
    """
    data = _json_ready(dict(document))
    if schema is not None:
        data = {"schema": schema, "schema_version": SCHEMA_VERSION, **data}
        validate_document(data, schema)
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    return _atomic_write(path, text)
