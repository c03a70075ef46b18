"""
Convergence sweeps and diagnostics over families of cloak profiles.

Every sweep is a list of independent work items (R, l, n, E ...) executed
by a bounded thread pool. Results come back in item order; resonant items
are kept with status "resonance" and NaN values.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from ..designs import (
    Potential,
    QuantumCloakSpec,
    default_truncation,
    quantum_potential_profile,
    truncated_cloak_profile,
)
from ..errors import CloakingError, ParameterError, PreconditionError, ResonanceError
from .eigen import eigenvalues_below, nearest_eigenvalue
from .solver import DEFAULT_RTOL, free_dn_value, radial_solve

logger = logging.getLogger(__name__)

WorkItem = Dict[str, Any]


def _describe(item: WorkItem) -> str:
    return " ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in item.items())


def run_work_items(
    items: Sequence[WorkItem],
    worker: Callable[[WorkItem], Dict[str, Any]],
    threads: int = 1,
    label: str = "sweep",
    nan_fields: Sequence[str] = (),
) -> List[Dict[str, Any]]:
    """
    Run independent work items, optionally in parallel, keeping item order.

    Args:
        items: Work item parameter dicts (echoed into each result row)
        worker: Function computing the result fields of one item
        threads: Worker pool size (1 runs sequentially)
        label: Name used in progress messages
        nan_fields: Result fields set to NaN when an item fails

    Returns:
        One row per item with a "status" of "ok", "resonance" or "failed"
    """
    if threads < 1:
        raise ParameterError(f"threads must be at least 1, got {threads}")
    total = len(items)
    results: List[Optional[Dict[str, Any]]] = [None] * total
    completed = 0
    lock = threading.Lock()

    def run_one(index: int):
        nonlocal completed
        item = items[index]
        try:
            row = {**item, **worker(item), "status": "ok"}
        except ResonanceError as e:
            logger.warning(f"{label} {_describe(item)}: {e}")
            row = {**item, **{f: float("nan") for f in nan_fields}, "status": "resonance"}
        except CloakingError as e:
            logger.error(f"{label} {_describe(item)} failed: {e}")
            row = {**item, **{f: float("nan") for f in nan_fields}, "status": "failed"}
        with lock:
            completed += 1
            logger.info(f"[{completed}/{total}] {label} {_describe(item)} -> {row['status']}")
        results[index] = row

    if threads > 1 and total > 1:
        logger.info(f"Running {total} {label} items with {threads} workers")
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(run_one, i) for i in range(total)]
            for future in as_completed(futures):
                future.result()
    else:
        for i in range(total):
            run_one(i)
    return [row for row in results if row is not None]


def _check_radii(R_list: Sequence[float]):
    if not R_list:
        raise ParameterError("R list is empty")
    for R in R_list:
        if not 1.0 < R < 2.0:
            raise ParameterError(f"Truncation radius R must lie in (1, 2), got {R}")


# ============================================================================
# Conductivity / acoustic cloak
# ============================================================================

def cloak_convergence_sweep(
    omega: float,
    l_max: int,
    R_list: Sequence[float],
    method: str = "auto",
    threads: int = 1,
    rtol: float = DEFAULT_RTOL,
) -> pd.DataFrame:
    """
    DN errors of truncated cloaks against the homogeneous ball.

    Returns:
        DataFrame with columns R, l, lambda, lambda_free, error, status
    """
    _check_radii(R_list)
    if l_max < 0:
        raise ParameterError(f"L_max must be non-negative, got {l_max}")
    omega2 = omega * omega
    items = [{"R": float(R), "l": l} for R in R_list for l in range(l_max + 1)]

    def worker(item: WorkItem) -> Dict[str, Any]:
        profile = truncated_cloak_profile(item["R"])
        lam = radial_solve(profile, item["l"], omega=omega, method=method, rtol=rtol).dn_value()
        free = free_dn_value(item["l"], omega2)
        return {"lambda": lam, "lambda_free": free, "error": abs(lam - free)}

    rows = run_work_items(items, worker, threads, "cloak-converge", ("lambda", "lambda_free", "error"))
    return pd.DataFrame(rows, columns=["R", "l", "lambda", "lambda_free", "error", "status"])


@dataclass
class HiddenFlux:
    """Flux t A u' on both sides of the truncation sphere."""

    R: float
    degree: int
    omega: float
    interior_flux: float
    exterior_flux: float

    @property
    def jump(self) -> float:
        return abs(self.interior_flux - self.exterior_flux)


def hidden_bc_flux(R: float, omega: float, degree: int, boundary: float = 1.0,
                   method: str = "auto", rtol: float = DEFAULT_RTOL) -> HiddenFlux:
    """
    Interior Neumann data at the truncation sphere for boundary data of one degree.

    Tends to 0 as R -> 1: the hidden Neumann condition of the ideal cloak.

    Raises:
        ResonanceError: omega is (numerically) an interior Neumann eigenfrequency
    """
    profile = truncated_cloak_profile(R)
    solution = radial_solve(profile, degree, omega=omega, boundary=boundary, method=method, rtol=rtol)
    return HiddenFlux(
        R=R,
        degree=degree,
        omega=omega,
        interior_flux=solution.flux(R, side=-1),
        exterior_flux=solution.flux(R, side=+1),
    )


def hidden_flux_sweep(R_list: Sequence[float], omega: float, degrees: Sequence[int],
                      method: str = "auto", threads: int = 1, rtol: float = DEFAULT_RTOL) -> pd.DataFrame:
    """Hidden-flux table with columns R, l, interior_flux, exterior_flux, abs_interior_flux, status."""
    _check_radii(R_list)
    items = [{"R": float(R), "l": int(l)} for R in R_list for l in degrees]

    def worker(item: WorkItem) -> Dict[str, Any]:
        result = hidden_bc_flux(item["R"], omega, item["l"], method=method, rtol=rtol)
        return {
            "interior_flux": result.interior_flux,
            "exterior_flux": result.exterior_flux,
            "abs_interior_flux": abs(result.interior_flux),
        }

    rows = run_work_items(items, worker, threads, "hidden-flux",
                          ("interior_flux", "exterior_flux", "abs_interior_flux"))
    return pd.DataFrame(rows, columns=["R", "l", "interior_flux", "exterior_flux", "abs_interior_flux", "status"])


def interior_source_sweep(R_list: Sequence[float], omega: float = 0.0, degree: int = 0,
                          strength: float = 1.0, source_radius: float = 0.5,
                          threads: int = 1, rtol: float = DEFAULT_RTOL) -> pd.DataFrame:
    """
    Truncated-cloak solutions driven by a source inside the hidden region.

    The source is p = strength on r < source_radius (< 1). As R -> 1 the
    energy of the solution grows when the hidden Neumann problem has no
    solution for that source (e.g. l = 0 at omega = 0).

    Returns:
        DataFrame with columns R, energy, hidden_l2, boundary_flux, status
    """
    _check_radii(R_list)
    if not 0.0 < source_radius < 1.0:
        raise ParameterError(f"Source radius must lie in (0, 1), got {source_radius}")

    def source(r: float) -> float:
        return strength if r < source_radius else 0.0

    items = [{"R": float(R)} for R in R_list]

    def worker(item: WorkItem) -> Dict[str, Any]:
        R = item["R"]
        solution = radial_solve(truncated_cloak_profile(R), degree, omega=omega, source=source, boundary=0.0,
                                rtol=rtol)
        return {
            "energy": solution.gradient_energy(),
            "hidden_l2": math.sqrt(solution.l2_norm_squared(0.0, R)),
            "boundary_flux": solution.flux(2.0),
        }

    rows = run_work_items(items, worker, threads, "interior-source", ("energy", "hidden_l2", "boundary_flux"))
    return pd.DataFrame(rows, columns=["R", "energy", "hidden_l2", "boundary_flux", "status"])


# ============================================================================
# Quantum cloak
# ============================================================================

def check_quantum_preconditions(energy: float, W: Potential, l_max: int, tolerance: float = 1e-3,
                                rtol: float = DEFAULT_RTOL):
    """
    Verify E is neither a Dirichlet eigenvalue of the free ball B(0, 2) nor a
    Neumann eigenvalue of -Lap + W on B(0, 1), for every degree up to l_max.

    Raises:
        PreconditionError: naming the offending eigenvalue
    """
    limit = energy + 1.0
    for degree in range(l_max + 1):
        dirichlet = eigenvalues_below(degree, limit, radius=2.0, kind="dirichlet", rtol=rtol)
        nearest = nearest_eigenvalue(energy, dirichlet)
        if nearest is not None and abs(nearest - energy) < tolerance:
            raise PreconditionError(
                f"E={energy:g} is a Dirichlet eigenvalue {nearest:.6g} of the free ball (l={degree})", nearest
            )
        neumann = eigenvalues_below(degree, limit, radius=1.0, W=W, rtol=rtol)
        nearest = nearest_eigenvalue(energy, neumann)
        if nearest is not None and abs(nearest - energy) < tolerance:
            raise PreconditionError(
                f"E={energy:g} is a Neumann eigenvalue {nearest:.6g} of the hidden region (l={degree})", nearest
            )


def quantum_dn_convergence(
    n_list: Sequence[int],
    energy: float,
    W: Potential = None,
    l_max: int = 4,
    schedule: Optional[Callable[[int], float]] = None,
    threads: int = 1,
    check_preconditions: bool = True,
    rtol: float = DEFAULT_RTOL,
) -> pd.DataFrame:
    """
    DN errors of approximate quantum cloaks against free space at energy E.

    Returns:
        DataFrame with columns n, R, l, lambda, lambda_free, error, status
    """
    if not n_list:
        raise ParameterError("n list is empty")
    if any(n < 1 for n in n_list):
        raise ParameterError(f"Layer counts must be at least 1, got {list(n_list)}")
    if check_preconditions:
        check_quantum_preconditions(energy, W, l_max, rtol=rtol)
    schedule = schedule or default_truncation
    items = [{"n": int(n), "R": float(schedule(n)), "l": l} for n in n_list for l in range(l_max + 1)]

    def worker(item: WorkItem) -> Dict[str, Any]:
        spec = QuantumCloakSpec(item["n"], energy, truncation=item["R"], interior_potential=W)
        lam = radial_solve(quantum_potential_profile(spec), item["l"], energy=energy, rtol=rtol).dn_value()
        free = free_dn_value(item["l"], energy)
        return {"lambda": lam, "lambda_free": free, "error": abs(lam - free)}

    rows = run_work_items(items, worker, threads, "quantum-converge", ("lambda", "lambda_free", "error"))
    return pd.DataFrame(rows, columns=["n", "R", "l", "lambda", "lambda_free", "error", "status"])


@dataclass
class TrappedScan:
    """Energy-ratio curve and its refined local maxima."""

    curve: pd.DataFrame
    peaks: pd.DataFrame
    predicted: List[float]

    @property
    def off_peak_median(self) -> float:
        return float(np.nanmedian(self.curve["ratio"].to_numpy()))


def interior_energy_ratio(layers: int, energy: float, degree: int, W: Potential = None,
                          truncation: Optional[float] = None, rtol: float = DEFAULT_RTOL) -> float:
    """
    Ratio of |psi|^2 r^2 integrated over r < 1 to the same over 1 < r < 2, unit Dirichlet data.

    Raises:
        ResonanceError: from the solve
    """
    spec = QuantumCloakSpec(layers, energy, truncation=truncation, interior_potential=W)
    solution = radial_solve(quantum_potential_profile(spec), degree, energy=energy, rtol=rtol)
    return solution.l2_norm_squared(0.0, 1.0) / solution.l2_norm_squared(1.0, 2.0)


def trapped_state_scan(
    layers: int,
    energy_range: Tuple[float, float] = (15.0, 25.0),
    degree: int = 0,
    W: Potential = None,
    points: int = 201,
    refine: bool = True,
    truncation: Optional[float] = None,
    threads: int = 1,
    rtol: float = DEFAULT_RTOL,
) -> TrappedScan:
    """
    Scan the interior/exterior energy ratio of the quantum cloak over E.

    The curve is sampled on a uniform grid; each interior local maximum is
    refined with a bounded scalar minimisation over its two neighbouring
    grid cells and only then matched against the Neumann eigenvalues of
    -Lap + W on B(0, 1).

    Returns:
        TrappedScan with curve (energy, ratio, status) and peaks
        (energy, ratio, predicted, distance)
    """
    e_min, e_max = energy_range
    if not (math.isfinite(e_min) and math.isfinite(e_max) and e_min < e_max):
        raise ParameterError(f"Energy range must be finite and increasing, got {energy_range}")
    if points < 3:
        raise ParameterError(f"Need at least 3 scan points, got {points}")
    R = truncation if truncation is not None else default_truncation(layers)
    items = [{"energy": float(e)} for e in np.linspace(e_min, e_max, points)]

    def worker(item: WorkItem) -> Dict[str, Any]:
        return {"ratio": interior_energy_ratio(layers, item["energy"], degree, W, R, rtol)}

    rows = run_work_items(items, worker, threads, "trapped-scan", ("ratio",))
    curve = pd.DataFrame(rows, columns=["energy", "ratio", "status"])

    def objective(e: float) -> float:
        try:
            return -interior_energy_ratio(layers, e, degree, W, R, rtol)
        except ResonanceError:
            return 0.0

    predicted = [e for e in eigenvalues_below(degree, e_max + 1.0, radius=1.0, W=W, rtol=rtol)
                 if e_min - 1.0 < e < e_max + 1.0]
    peaks = []
    ratios = curve["ratio"].to_numpy()
    energies = curve["energy"].to_numpy()
    for i in range(1, len(curve) - 1):
        if not (np.isfinite(ratios[i - 1:i + 2]).all()):
            continue
        if ratios[i] > ratios[i - 1] and ratios[i] >= ratios[i + 1]:
            e_peak, r_peak = float(energies[i]), float(ratios[i])
            if refine:
                result = minimize_scalar(objective, bounds=(energies[i - 1], energies[i + 1]),
                                         method="bounded", options={"xatol": 1e-9})
                if -result.fun > r_peak:
                    e_peak, r_peak = float(result.x), float(-result.fun)
            nearest = nearest_eigenvalue(e_peak, predicted)
            peaks.append({
                "energy": e_peak,
                "ratio": r_peak,
                "predicted": nearest if nearest is not None else float("nan"),
                "distance": abs(e_peak - nearest) if nearest is not None else float("nan"),
            })
    peak_frame = pd.DataFrame(peaks, columns=["energy", "ratio", "predicted", "distance"])
    logger.info(f"Trapped-state scan n={layers} l={degree}: {len(peak_frame)} peak(s), predicted {predicted}")
    return TrappedScan(curve=curve, peaks=peak_frame, predicted=predicted)
