"""
Ray fans, batch tracing and the straight-line comparison for the cloak metric.

The cloak metric is the push-forward of the Euclidean metric by the blow-up
map F_1, so every traced ray must be the F_1-image of a straight line: it
leaves the exit sphere where the undeflected line does, in the same
direction, after the same optical length.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import SingularSetError
from ..geometry import SymTensorField
from ..radial.sweeps import run_work_items
from ..transforms import DiffeoMap, blowup_point_map
from .hamiltonian import DEFAULT_TOL, RayState, TerminationReason, TraceResult, trace

logger = logging.getLogger(__name__)

COMPARE_COLUMNS = [
    "ray", "impact", "reason", "exit_error", "direction_error", "length_error",
    "path_error", "hamiltonian_drift", "flagged",
]


def ray_fan(
    count: int,
    impact_range: Tuple[float, float] = (0.1, 1.9),
    start_x: float = -3.0,
    seed: Optional[int] = 0,
    random: bool = True,
) -> List[RayState]:
    """
    Rays launched along +x from the plane x = start_x.

    With `random` the impact parameters are uniform in impact_range and the
    azimuth about the x-axis is uniform; otherwise impacts are evenly spaced
    in the xy-plane.
    """
    if count <= 0:
        return []
    lo, hi = impact_range
    if random:
        rng = np.random.default_rng(seed)
        impacts = rng.uniform(lo, hi, count)
        azimuths = rng.uniform(0.0, 2.0 * math.pi, count)
    else:
        impacts = np.linspace(lo, hi, count)
        azimuths = np.zeros(count)
    return [
        RayState.launch((start_x, b * math.cos(phi), b * math.sin(phi)), (1.0, 0.0, 0.0))
        for b, phi in zip(impacts, azimuths)
    ]


def impact_parameter(state: RayState) -> float:
    """Distance from the origin to the straight line through the start."""
    d = state.p / np.linalg.norm(state.p)
    return float(np.linalg.norm(np.cross(state.x, d)))


def trace_rays(metric: SymTensorField, rays: Sequence[RayState], t_max: float = 100.0,
               tol: float = DEFAULT_TOL, domain_radius: Optional[float] = None,
               threads: int = 1) -> List[Optional[TraceResult]]:
    """Trace independent rays (parallel when threads > 1); failed rays come back as None."""
    items = [{"ray": i} for i in range(len(rays))]

    def worker(item: Dict[str, Any]) -> Dict[str, Any]:
        return {"result": trace(metric, rays[item["ray"]], t_max, tol, domain_radius)}

    rows = run_work_items(items, worker, threads, "rays", ("result",))
    return [row["result"] if row["status"] == "ok" else None for row in rows]


def _sphere_exit(x0: np.ndarray, d: np.ndarray, radius: float) -> Tuple[np.ndarray, float]:
    # |x0 + s d| = radius with |d| = 1, forward root
    b = float(x0 @ d)
    c = float(x0 @ x0) - radius * radius
    s = -b + math.sqrt(b * b - c)
    return x0 + s * d, s


def compare_with_straight_line(result: Optional[TraceResult], start: RayState, exit_radius: float,
                               preimage: DiffeoMap) -> Dict[str, Any]:
    """Exit, direction, length and path errors of one trace against the pulled-back straight line."""
    impact = impact_parameter(start)
    if result is None or result.reason != TerminationReason.EXITED:
        reason = result.reason.value if result is not None else "failed"
        nan = float("nan")
        return {"impact": impact, "reason": reason, "exit_error": nan, "direction_error": nan,
                "length_error": nan, "path_error": nan,
                "hamiltonian_drift": result.hamiltonian_drift if result is not None else nan}
    x0 = start.x
    d = start.p / np.linalg.norm(start.p)
    exit_point, chord = _sphere_exit(x0, d, exit_radius)
    final = result.final
    direction = final.p / np.linalg.norm(final.p)
    path_error = 0.0
    for sample in result.samples:
        s = sample.position.norm()
        if not 1.0 < s < 2.0:
            continue
        try:
            x = preimage.inverse(sample.x)
        except SingularSetError:
            continue
        path_error = max(path_error, float(np.linalg.norm(np.cross(x - x0, d))))
    return {
        "impact": impact,
        "reason": result.reason.value,
        "exit_error": float(np.linalg.norm(final.x - exit_point)) / exit_radius,
        "direction_error": float(np.linalg.norm(direction - d)),
        "length_error": abs(result.optical_length - chord) / chord,
        "path_error": path_error,
        "hamiltonian_drift": result.hamiltonian_drift,
    }


def travel_time_compare(
    metric: SymTensorField,
    rays: Sequence[RayState],
    exit_radius: float = 4.0,
    tol: float = DEFAULT_TOL,
    t_max: float = 100.0,
    threads: int = 1,
    flag_tolerance: float = 1e-6,
    preimage: Optional[DiffeoMap] = None,
) -> pd.DataFrame:
    """
    Trace a ray family through the cloak metric and compare with straight lines.

    Rays must start outside B(0, 2), where the blow-up map is the identity.
    Rows whose trace did not exit, or whose errors exceed flag_tolerance,
    are flagged rather than raised.

    Returns:
        DataFrame with columns ray, impact, reason, exit_error,
        direction_error, length_error, path_error, hamiltonian_drift, flagged
    """
    results = trace_rays(metric, rays, t_max, tol, exit_radius, threads)
    return compare_traces(rays, results, exit_radius, flag_tolerance, preimage)


def compare_traces(
    rays: Sequence[RayState],
    results: Sequence[Optional[TraceResult]],
    exit_radius: float = 4.0,
    flag_tolerance: float = 1e-6,
    preimage: Optional[DiffeoMap] = None,
) -> pd.DataFrame:
    """Comparison table for rays that have already been traced (see travel_time_compare)."""
    preimage = preimage or blowup_point_map()
    rows = []
    for i, (start, result) in enumerate(zip(rays, results)):
        row = {"ray": i, **compare_with_straight_line(result, start, exit_radius, preimage)}
        errors = [row["exit_error"], row["direction_error"], row["length_error"], row["path_error"]]
        row["flagged"] = bool(any(not (e <= flag_tolerance) for e in errors))
        if row["flagged"]:
            logger.warning(f"Ray {i} (impact {row['impact']:.4g}) flagged: {row['reason']}, "
                           f"length error {row['length_error']:.3e}")
        rows.append(row)
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)


def polyline_frame(results: Sequence[Optional[TraceResult]]) -> pd.DataFrame:
    """Stacked polyline records with a leading ray index (t, x, y, z, px, py, pz, H ...)."""
    frames = []
    for i, result in enumerate(results):
        if result is None:
            continue
        frame = pd.DataFrame(result.to_records())
        frame.insert(0, "ray", i)
        frames.append(frame)
    columns = ["ray", "t", "x", "y", "z", "px", "py", "pz", "H", "length", "piece"]
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True)[columns]
