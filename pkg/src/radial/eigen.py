"""
Interior eigenvalues of -Lap + W on a ball by shooting and bisection.

The regular solution is propagated outward through the potential
intervals; Neumann eigenvalues are the zeros of
m(E) = r u' / hypot(u, r u') at the ball radius, Dirichlet eigenvalues the
zeros of u / hypot(u, r u').
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..designs import ConstantMedium, Potential, RadialInterval, potential_interval
from ..errors import ParameterError
from .bases import DEFAULT_RTOL, make_basis

logger = logging.getLogger(__name__)

MAX_SCAN_STEPS = 20000


def hidden_region_intervals(radius: float, W: Potential = None, potential_radius: float = 1.0) -> List[RadialInterval]:
    """Intervals of B(0, radius) carrying W on r < potential_radius and 0 beyond."""
    if not radius > 0.0:
        raise ParameterError(f"Ball radius must be positive, got {radius}")
    core = min(potential_radius, radius)
    intervals = [potential_interval(0.0, core, W, 1.0, "core")]
    if radius > core:
        intervals.append(RadialInterval(core, radius, medium=ConstantMedium(1.0, 1.0, 1.0, 0.0), label="gap"))
    return intervals


def shoot(intervals: Sequence[RadialInterval], degree: int, energy: float,
          rtol: float = DEFAULT_RTOL) -> Tuple[float, float]:
    """
    Regular solution (u, r u') at the outer radius, scaled to unit size.

    Args:
        intervals: Contiguous intervals starting at r = 0
        degree: Harmonic degree l
        energy: E (the equation is (r^2 u')' + [r^2 (E - W) - L] u = 0)
        rtol: Relative tolerance of integrated intervals
    """
    first = make_basis(intervals[0], degree, energy, first=True, rtol=rtol)
    u_b, _, q_b = first.evaluate(intervals[0].r_outer)
    u, q = float(u_b[0]), float(q_b[0])
    for interval in intervals[1:]:
        basis = make_basis(interval, degree, energy, first=False, rtol=rtol)
        u_in, _, q_in = basis.evaluate(interval.r_inner)
        coef = np.linalg.solve(np.array([u_in, q_in]), np.array([u, q]))
        u_out, _, q_out = basis.evaluate(interval.r_outer)
        u, q = float(coef @ u_out), float(coef @ q_out)
        norm = math.hypot(u, q)
        u, q = u / norm, q / norm
    r = intervals[-1].r_outer
    flux_term = q / r  # r u' = q / r for A = r^2
    size = math.hypot(u, flux_term)
    return u / size, flux_term / size


def _minimum_potential(W: Potential, core: float, has_gap: bool) -> float:
    if W is None:
        return 0.0
    if callable(W):
        samples = [float(W(r)) for r in np.linspace(0.0, core, 201)]
        low = min(samples)
    else:
        low = float(W)
    return min(low, 0.0) if has_gap else low


def _scan_roots(mismatch: Callable[[float], float], start: float, step: float, count: int,
                rtol: float = DEFAULT_RTOL) -> List[float]:
    roots: List[float] = []
    a, fa = start, mismatch(start)
    for _ in range(MAX_SCAN_STEPS):
        if len(roots) >= count:
            break
        b = a + step
        fb = mismatch(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(mismatch, a, b, xtol=1e-2 * rtol, rtol=1e-14))
        a, fa = b, fb
    return roots[:count]


def neumann_eigenvalues(
    degree: int,
    radius: float = 1.0,
    W: Potential = None,
    count: int = 3,
    potential_radius: float = 1.0,
    step: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
) -> List[float]:
    """
    First Neumann eigenvalues of -Lap + W on B(0, radius) for one degree.

    Args:
        degree: Harmonic degree l
        radius: Ball radius
        W: Potential on r < potential_radius (constant, radial callable or None)
        count: Number of eigenvalues wanted
        potential_radius: Support radius of W
        step: Energy scan step (defaults to 0.25 / radius^2)
        rtol: Relative tolerance of the shooting integration; roots are
            bracketed to 1e-2 * rtol in energy

    Returns:
        Ascending energies (possibly fewer than count if the scan budget runs out)
    """
    if count < 1:
        return []
    intervals = hidden_region_intervals(radius, W, potential_radius)
    start = _minimum_potential(W, min(potential_radius, radius), radius > potential_radius) - 1.0
    step = step or 0.25 / (radius * radius)

    def mismatch(energy: float) -> float:
        return shoot(intervals, degree, energy, rtol)[1]

    roots = _scan_roots(mismatch, start, step, count, rtol)
    logger.debug(f"Neumann eigenvalues l={degree} radius={radius}: {roots}")
    return roots


def dirichlet_eigenvalues(
    degree: int,
    radius: float = 2.0,
    W: Potential = None,
    count: int = 3,
    potential_radius: float = 1.0,
    step: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
) -> List[float]:
    """First Dirichlet eigenvalues of -Lap + W on B(0, radius) for one degree."""
    if count < 1:
        return []
    intervals = hidden_region_intervals(radius, W, potential_radius)
    start = _minimum_potential(W, min(potential_radius, radius), radius > potential_radius) - 1.0
    step = step or 0.25 / (radius * radius)
    return _scan_roots(lambda energy: shoot(intervals, degree, energy, rtol)[0], start, step, count, rtol)


def nearest_eigenvalue(energy: float, eigenvalues: Sequence[float]) -> Optional[float]:
    if not eigenvalues:
        return None
    return min(eigenvalues, key=lambda e: abs(e - energy))


def eigenvalues_below(degree: int, limit: float, radius: float = 1.0, W: Potential = None,
                      kind: str = "neumann", potential_radius: float = 1.0,
                      rtol: float = DEFAULT_RTOL) -> List[float]:
    """All Neumann (or Dirichlet) eigenvalues of one degree not exceeding `limit`."""
    finder = neumann_eigenvalues if kind == "neumann" else dirichlet_eigenvalues
    count = 4
    while True:
        values = finder(degree, radius, W, count=count, potential_radius=potential_radius, rtol=rtol)
        if len(values) < count or values[-1] > limit:
            return [e for e in values if e <= limit]
        count *= 2
