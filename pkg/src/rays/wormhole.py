"""
Rays through the wormhole design.

The handle chart is spherically symmetric, so |x x p| / sqrt(2H) is the
Clairaut invariant r(z) sin(angle to the meridian): a ray can only pass the
handle where r(z) exceeds it, otherwise it turns back.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..designs import WarpProfile
from ..errors import DomainError
from ..transforms import StoDesign
from .hamiltonian import DEFAULT_TOL, MAX_STEPS, RayState, TraceResult, trace_design

logger = logging.getLogger(__name__)

HANDLE_PIECE = 1


@dataclass
class WormholeTrace:
    """Trace through the wormhole with handle diagnostics."""

    result: TraceResult
    clairaut: List[float]
    max_handle_z: float

    @property
    def route(self) -> List[str]:
        return [label for label, _ in self.result.transitions]

    @property
    def transited(self) -> bool:
        """Entered through one mouth and left through the other."""
        route = self.route
        return len(route) >= 2 and route[0].split("^")[0] != route[1].split("^")[0]

    @property
    def returned(self) -> bool:
        """Entered the handle and came back out of the same mouth."""
        route = self.route
        return len(route) >= 2 and route[0].split("^")[0] == route[1].split("^")[0]

    @property
    def clairaut_drift(self) -> float:
        if not self.clairaut:
            return 0.0
        c0 = self.clairaut[0]
        scale = max(abs(c0), 1e-300)
        return max(abs(c - c0) for c in self.clairaut) / scale


def clairaut_invariant(state: RayState, hamiltonian_value: float) -> float:
    """|x x p| / sqrt(2H): r(z) times the sine of the angle to the handle axis."""
    return float(np.linalg.norm(np.cross(state.x, state.p))) / math.sqrt(2.0 * hamiltonian_value)


def turning_height(warp: WarpProfile, clairaut: float, samples: int = 2001) -> Optional[float]:
    """First z in [0, 1] with r(z) = clairaut, or None if the ray passes."""
    zs = np.linspace(0.0, 1.0, samples)
    radii = np.array([warp.radius(z) for z in zs])
    below = np.nonzero(radii <= clairaut)[0]
    if len(below) == 0:
        return None
    return float(zs[below[0]])


def wormhole_trace(
    design: StoDesign,
    start: RayState,
    t_max: float = 60.0,
    tol: float = DEFAULT_TOL,
    domain_radius: Optional[float] = None,
    max_steps: int = MAX_STEPS,
) -> WormholeTrace:
    """
    Trace a ray that starts in the exterior piece of a wormhole design.

    Args:
        design: Design built by wormhole_geometry
        start: Ray in M1 (outside both unit balls)
        t_max: Largest Hamiltonian parameter
        tol: Relative integration tolerance
        domain_radius: Exit sphere radius (defaults to separation + 3)

    Raises:
        DomainError: wrong design or start inside a removed ball
    """
    if len(design.pieces) != 2 or len(design.transitions) != 2:
        raise DomainError(f"Design '{design.name}' is not a wormhole (two pieces, two gluings expected)")
    if start.piece != 0:
        raise DomainError("Wormhole rays must start in the exterior piece")
    separation = float(design.parameters.get("separation", 4.0))
    handle_length = float(design.parameters.get("handle_length", 1.0))
    for transition in design.transitions:
        center = transition.source_center if transition.source_piece == 0 else transition.target_center
        radius = transition.source_radius if transition.source_piece == 0 else transition.target_radius
        if np.linalg.norm(start.x - np.asarray(center)) <= radius:
            raise DomainError(f"Ray start {start.x.tolist()} lies inside the removed ball at {center}")

    radius = domain_radius if domain_radius is not None else separation + 3.0
    result = trace_design(design, start, t_max, tol, radius, max_steps)

    clairaut = []
    max_z = 0.0
    for state, h in zip(result.samples, result.hamiltonians):
        if state.piece != HANDLE_PIECE:
            continue
        clairaut.append(clairaut_invariant(state, h))
        max_z = max(max_z, (state.position.norm() - 1.0) / handle_length)
    traced = WormholeTrace(result=result, clairaut=clairaut, max_handle_z=max_z)
    logger.info(
        f"Wormhole ray from {np.round(start.x, 6).tolist()}: route {traced.route}, "
        f"{result.reason.value}, handle z_max={max_z:.4f}"
    )
    return traced
