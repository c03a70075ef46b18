"""
Hamiltonian ray tracing through metric fields and STO designs.
"""

from .hamiltonian import (
    RayState,
    TerminationReason,
    TraceResult,
    apply_transition,
    hamiltonian,
    refract,
    trace,
    trace_design,
)
from .wormhole import WormholeTrace, clairaut_invariant, turning_height, wormhole_trace
from .batch import compare_traces, impact_parameter, polyline_frame, ray_fan, trace_rays, travel_time_compare

__all__ = [
    "RayState",
    "TerminationReason",
    "TraceResult",
    "apply_transition",
    "hamiltonian",
    "refract",
    "trace",
    "trace_design",
    "WormholeTrace",
    "clairaut_invariant",
    "turning_height",
    "wormhole_trace",
    "compare_traces",
    "impact_parameter",
    "polyline_frame",
    "ray_fan",
    "trace_rays",
    "travel_time_compare",
]
