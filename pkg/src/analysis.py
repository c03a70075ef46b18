"""
Analysis of sweep tables and run manifests.

Monotonicity checks over convergence sweeps, per-key error summaries,
peak tables, and the plain-text report printed after a run.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd


# ============================================================================
# Standalone Analysis Functions
# ============================================================================

def load_manifests(output_dir: str = "output") -> List[Dict[str, Any]]:
    """
    Load every run manifest below an output directory.

    Args:
        output_dir: Directory searched recursively for *.manifest.json

    Returns:
        List of manifest dictionaries (with the file name under "_filename")
    """
    manifests = []
    root = Path(output_dir)

    if not root.exists():
        logging.warning(f"Output directory not found: {output_dir}")
        return manifests

    for json_file in sorted(root.rglob("*.manifest.json")):
        try:
            with open(json_file, "r") as f:
                data = json.load(f)
                data["_filename"] = str(json_file.relative_to(root))
                manifests.append(data)
        except (OSError, json.JSONDecodeError) as e:
            logging.error(f"Error loading {json_file}: {e}")

    logging.info(f"Loaded {len(manifests)} run manifests from {output_dir}")
    return manifests


def is_monotone_decreasing(values: Sequence[float], strict: bool = False, slack: float = 0.0) -> bool:
    """
    Whether a sequence never increases (NaN entries are skipped).

    Args:
        values: Sequence in sweep order
        strict: Require a strict decrease at every step
        slack: Absolute increase tolerated between neighbours
    """
    finite = [float(v) for v in values if np.isfinite(v)]
    for a, b in zip(finite, finite[1:]):
        if strict and not b < a:
            return False
        if b > a + slack:
            return False
    return True


def monotonicity_table(
    frame: pd.DataFrame,
    group_by: str,
    order_by: str,
    value: str = "error",
    ascending: bool = False,
    slack: float = 0.0,
    use_abs: bool = False,
) -> pd.DataFrame:
    """
    Check that `value` decreases along `order_by` within each `group_by` group.

    Args:
        frame: Sweep table
        group_by: Column whose groups are checked separately (e.g. "l")
        order_by: Sweep parameter (e.g. "R" or "n")
        value: Column expected to decrease
        ascending: Sort order of the sweep parameter (R decreases toward the
            ideal cloak, n increases)
        slack: Absolute increase tolerated between neighbours
        use_abs: Compare magnitudes

    Returns:
        DataFrame with columns group, first, last, reduction, monotone
    """
    rows = []
    for key, group in frame.groupby(group_by, sort=True):
        ordered = group.sort_values(order_by, ascending=ascending)[value].to_numpy(dtype=float)
        if use_abs:
            ordered = np.abs(ordered)
        finite = ordered[np.isfinite(ordered)]
        first = float(finite[0]) if len(finite) else float("nan")
        last = float(finite[-1]) if len(finite) else float("nan")
        rows.append({
            group_by: key,
            "first": first,
            "last": last,
            "reduction": first / last if last != 0.0 and np.isfinite(last) else float("inf"),
            "monotone": is_monotone_decreasing(ordered, slack=slack),
        })
    return pd.DataFrame(rows, columns=[group_by, "first", "last", "reduction", "monotone"])


def error_summary(frame: pd.DataFrame, key: str, value: str = "error") -> pd.DataFrame:
    """
    Largest and mean error per sweep key.

    Returns:
        DataFrame with columns key, max_error, mean_error, resonant
    """
    rows = []
    for k, group in frame.groupby(key, sort=True):
        values = group[value].to_numpy(dtype=float)
        finite = values[np.isfinite(values)]
        rows.append({
            key: k,
            "max_error": float(finite.max()) if len(finite) else float("nan"),
            "mean_error": float(finite.mean()) if len(finite) else float("nan"),
            "resonant": int((group["status"] == "resonance").sum()) if "status" in group else 0,
        })
    return pd.DataFrame(rows, columns=[key, "max_error", "mean_error", "resonant"])


def peak_table(curve: pd.DataFrame, x: str = "energy", y: str = "ratio", top: Optional[int] = None) -> pd.DataFrame:
    """
    Local maxima of a sampled curve with their prominence over the curve median.

    Returns:
        DataFrame with columns x, y, prominence sorted by y descending
    """
    values = curve[y].to_numpy(dtype=float)
    xs = curve[x].to_numpy(dtype=float)
    median = float(np.nanmedian(values)) if len(values) else float("nan")
    rows = []
    for i in range(1, len(values) - 1):
        if not np.isfinite(values[i - 1:i + 2]).all():
            continue
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            rows.append({x: float(xs[i]), y: float(values[i]), "prominence": float(values[i]) / median})
    peaks = pd.DataFrame(rows, columns=[x, y, "prominence"]).sort_values(y, ascending=False, ignore_index=True)
    return peaks.head(top) if top is not None else peaks


def ray_summary(compare: pd.DataFrame) -> Dict[str, Any]:
    """Aggregate errors of a straight-line comparison table."""
    exited = compare[compare["reason"] == "exited"]
    return {
        "rays": int(len(compare)),
        "exited": int(len(exited)),
        "flagged": int(compare["flagged"].sum()) if len(compare) else 0,
        "max_length_error": float(exited["length_error"].max()) if len(exited) else float("nan"),
        "max_exit_error": float(exited["exit_error"].max()) if len(exited) else float("nan"),
        "max_hamiltonian_drift": float(compare["hamiltonian_drift"].max()) if len(compare) else float("nan"),
    }


# ============================================================================
# Report
# ============================================================================

class RunAnalyzer:
    """
    Builds the text report for a finished run.

    Provides:
    - Stage status listing
    - Per-table summaries
    """

    def __init__(self):
        self.log = logging.getLogger(__name__)

    def generate_report(self, manifest: Dict[str, Any], summaries: Optional[Dict[str, Any]] = None) -> str:
        """
        Generate a text summary of one run.

        Args:
            manifest: Run manifest dictionary
            summaries: Optional name -> DataFrame or dict of result summaries

        Returns:
            Formatted report string
        """
        report = []
        report.append("=" * 60)
        report.append(f"CLOAKING TOOLKIT - {manifest.get('kind', 'run').upper()}")
        report.append("=" * 60)
        report.append(f"\nVersion: {manifest.get('version', '?')}  Status: {manifest.get('status', '?')}\n")

        report.append("-" * 60)
        report.append("STAGES")
        report.append("-" * 60)
        for stage in manifest.get("stages", []):
            report.append(f"{stage['name']:.<30} {stage['status']:>10}  ({stage['seconds']:.2f} s)")

        files = manifest.get("files", [])
        if files:
            report.append("\n" + "-" * 60)
            report.append("FILES")
            report.append("-" * 60)
            for entry in files:
                report.append(f"  {entry['path']}  ({entry['rows']} rows)" if "rows" in entry else f"  {entry['path']}")

        for name, summary in (summaries or {}).items():
            report.append("\n" + "-" * 60)
            report.append(name.upper())
            report.append("-" * 60)
            if isinstance(summary, pd.DataFrame):
                report.append(summary.to_string(index=False) if not summary.empty else "(empty)")
            else:
                for key, value in summary.items():
                    report.append(f"{key:.<30} {value}")

        report.append("\n" + "=" * 60)
        return "\n".join(report)

    def print_report(self, manifest: Dict[str, Any], summaries: Optional[Dict[str, Any]] = None):
        print(self.generate_report(manifest, summaries))
