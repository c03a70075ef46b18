"""
Hamiltonian geodesic integration through metric fields.

Rays are integrated in index-raised form,

    dx/dt = G p,    dp/dt = -1/2 p . (dG/dx) p,    G = g^{-1},

with H = 1/2 p . G p conserved and optical length dl = sqrt(2H) dt.
Metric interfaces (spheres where the metric jumps) refract the covector:
the tangential part is kept and the normal part is re-solved from H.
For STO designs the ray moves between manifold pieces through the chart
transitions of the design.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from ..errors import DomainError, ParameterError
from ..geometry import Point3, PointLike, SymTensorField, as_point_array
from ..transforms import ChartTransition, StoDesign

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
GUARD_DISTANCE = 1e-9
MIN_STEP = 1e-12
MAX_STEPS = 200000
EVENT_SUBSAMPLES = 16


class TerminationReason(str, Enum):
    EXITED = "exited"
    TANGENCY_GUARD = "tangency_guard"
    MAX_STEPS = "max_steps"
    T_MAX = "t_max"


@dataclass(frozen=True)
class RayState:
    """Point on a ray: position, covector momentum, parameter, optical length and piece."""

    position: Point3
    momentum: Tuple[float, float, float]
    t: float = 0.0
    length: float = 0.0
    piece: int = 0

    @classmethod
    def launch(cls, position: PointLike, direction: Sequence[float], piece: int = 0) -> "RayState":
        """Ray at a point with Euclidean covector `direction` (need not be normalised)."""
        x = as_point_array(position)
        p = np.asarray(direction, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)) or not np.any(p):
            raise DomainError(f"Ray momentum must be a nonzero finite 3-vector, got {direction}")
        return cls(Point3.from_array(x), tuple(float(v) for v in p), piece=piece)

    @property
    def x(self) -> np.ndarray:
        return self.position.as_array()

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.momentum, dtype=float)

    def reversed(self) -> "RayState":
        """Same point with the momentum reversed (time-reversed ray)."""
        return RayState(self.position, tuple(-v for v in self.momentum), 0.0, 0.0, self.piece)


@dataclass
class TraceResult:
    """Polyline of ray samples plus how the trace ended."""

    samples: List[RayState]
    hamiltonians: List[float]
    reason: TerminationReason
    transitions: List[Tuple[str, float]] = field(default_factory=list)
    steps: int = 0

    @property
    def final(self) -> RayState:
        return self.samples[-1]

    @property
    def optical_length(self) -> float:
        return self.samples[-1].length

    @property
    def hamiltonian_drift(self) -> float:
        """max |H(t) - H(0)| / H(0) over the samples."""
        h0 = self.hamiltonians[0]
        return max(abs(h - h0) for h in self.hamiltonians) / h0

    def positions(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    def to_records(self) -> List[dict]:
        """Polyline rows t, x, y, z, px, py, pz, H (plus piece and optical length)."""
        return [
            {
                "t": s.t,
                "x": s.position.x,
                "y": s.position.y,
                "z": s.position.z,
                "px": s.momentum[0],
                "py": s.momentum[1],
                "pz": s.momentum[2],
                "H": h,
                "length": s.length,
                "piece": s.piece,
            }
            for s, h in zip(self.samples, self.hamiltonians)
        ]


def hamiltonian(metric: SymTensorField, x: np.ndarray, p: np.ndarray) -> float:
    return 0.5 * float(p @ metric.inverse_matrix(x) @ p)


def _rhs_factory(metric: SymTensorField) -> Callable[[float, np.ndarray], np.ndarray]:
    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        x, p = y[:3], y[3:6]
        G = metric.inverse_matrix(x)
        dG = metric.inverse_gradient(x)
        dx = G @ p
        dp = -0.5 * np.einsum("kij,i,j->k", dG, p, p)
        dl = math.sqrt(max(float(p @ dx), 0.0))
        return np.concatenate([dx, dp, [dl]])

    return rhs


@dataclass
class Boundary:
    """
    Sphere where integration on a piece stops.

    `kind` is "interface" (metric jump, refract), "exit" (leave the domain),
    "guard" (singular set), or "transition" (glued sphere of an STO design).
    `inside` is +1 when the ray's admissible side is |x - c| > radius.
    """

    center: np.ndarray
    radius: float
    kind: str
    inside: int = 1
    transition: Optional[ChartTransition] = None
    forward: bool = True

    def value(self, x: np.ndarray) -> float:
        return self.inside * (float(np.linalg.norm(x - self.center)) - self.radius)

    def normal(self, x: np.ndarray) -> np.ndarray:
        d = x - self.center
        return d / np.linalg.norm(d)


def _side_from_motion(boundary: Boundary, x: np.ndarray, velocity: np.ndarray) -> int:
    offset = float(np.linalg.norm(x - boundary.center)) - boundary.radius
    if abs(offset) > 1e-12 * max(1.0, boundary.radius):
        return 1 if offset > 0 else -1
    return 1 if float(velocity @ boundary.normal(x)) >= 0.0 else -1


def refract(metric: SymTensorField, x: np.ndarray, p: np.ndarray, normal: np.ndarray,
            direction: int) -> Tuple[np.ndarray, bool]:
    """
    Covector after crossing a metric interface along `normal` in `direction` (+1 outward).

    Keeps the tangential covector and H. Returns (p_new, reflected); when the
    far-side Hamiltonian has no root moving across, the ray is totally
    reflected with the normal velocity reversed on the near side.
    """
    H = 0.5 * float(p @ metric.limit_inverse_matrix(x, normal, -direction) @ p)
    p_n = float(p @ normal)
    p_t = p - p_n * normal

    def crossing_roots(side: int) -> List[Tuple[float, float]]:
        G = metric.limit_inverse_matrix(x, normal, side)
        a = float(normal @ G @ normal)
        b = 2.0 * float(normal @ G @ p_t)
        c = float(p_t @ G @ p_t) - 2.0 * H
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return []
        root = math.sqrt(disc)
        out = []
        for mu in ((-b + root) / (2.0 * a), (-b - root) / (2.0 * a)):
            velocity = float(normal @ G @ (p_t + mu * normal))
            out.append((mu, velocity))
        return out

    for mu, velocity in crossing_roots(direction):
        if velocity * direction > 0.0:
            return p_t + mu * normal, False
    # total internal reflection: the other root on the incident side
    for mu, velocity in crossing_roots(-direction):
        if velocity * direction < 0.0:
            return p_t + mu * normal, True
    return p_t - p_n * normal, True


class PieceIntegrator:
    """
    Integrates one ray on one manifold piece until a boundary event.

    Args:
        metric: Metric field of the piece
        boundaries: Event spheres (interfaces, exits, guards, transitions)
        tol: Relative integration tolerance
        max_step: Largest parameter step
    """

    def __init__(self, metric: SymTensorField, boundaries: List[Boundary], tol: float = DEFAULT_TOL,
                 max_step: float = 0.05):
        self.metric = metric
        self.boundaries = boundaries
        self.tol = tol
        self.max_step = max_step
        self.rhs = _rhs_factory(metric)
        self.log = logging.getLogger(f"{__name__}.{metric.name}")

    def _event_time(self, boundary: Boundary, dense, t_old: float, t_new: float) -> Optional[float]:
        ts = np.linspace(t_old, t_new, EVENT_SUBSAMPLES + 1)
        values = [boundary.value(dense(t)[:3]) for t in ts]
        for i in range(EVENT_SUBSAMPLES):
            lo, hi = values[i], values[i + 1]
            if hi >= 0.0:
                continue
            if lo > 0.0:
                return brentq(lambda t: boundary.value(dense(t)[:3]), ts[i], ts[i + 1], xtol=1e-15, rtol=1e-14)
            if lo == 0.0 and i > 0:
                return float(ts[i])
        return None

    def run(self, y0: np.ndarray, t0: float, t_max: float, max_steps: int,
            on_sample: Callable[[float, np.ndarray], None]) -> Tuple[Optional[Boundary], float, np.ndarray, int, bool]:
        """
        Integrate from (t0, y0) until a boundary is crossed, t_max, or the step budget is spent.

        Returns:
            (boundary or None, t, state, steps, collapsed) where `collapsed`
            reports a step-size collapse.
        """
        solver = DOP853(self.rhs, t0, y0, t_max, rtol=self.tol, atol=self.tol * 1e-2, max_step=self.max_step)
        steps = 0
        while solver.status == "running" and steps < max_steps:
            t_old = solver.t
            message = solver.step()
            steps += 1
            if solver.status == "failed":
                self.log.warning(f"Integrator stopped at t={solver.t:.6g}: {message}")
                return None, solver.t, solver.y, steps, True
            dense = solver.dense_output()
            hits = []
            for boundary in self.boundaries:
                if boundary.value(solver.y[:3]) < 0.0:
                    t_hit = self._event_time(boundary, dense, t_old, solver.t)
                    if t_hit is not None:
                        hits.append((t_hit, boundary))
            if hits:
                t_hit, boundary = min(hits, key=lambda h: h[0])
                return boundary, t_hit, dense(t_hit), steps, False
            on_sample(solver.t, solver.y)
            if solver.status == "running" and solver.step_size < MIN_STEP:
                return None, solver.t, solver.y, steps, True
        return None, solver.t, solver.y, steps, False


def _guard_boundaries(metric: SymTensorField) -> List[Boundary]:
    support = metric.singular_support
    guards = [Boundary(np.asarray(c, dtype=float), GUARD_DISTANCE, "guard") for c in support.points]
    for center, radius in support.spheres:
        guards.append(Boundary(np.asarray(center, dtype=float), radius, "guard"))
    return guards


def _arm_guard(boundary: Boundary, x: np.ndarray):
    """Shrink a guard sphere into a band of width GUARD_DISTANCE on the ray's side."""
    side = 1 if float(np.linalg.norm(x - boundary.center)) > boundary.radius else -1
    boundary.inside = side
    if boundary.radius > GUARD_DISTANCE:
        boundary.radius = boundary.radius + side * GUARD_DISTANCE


def _interface_boundaries(metric: SymTensorField) -> List[Boundary]:
    return [Boundary(np.zeros(3), float(rho), "interface") for rho in metric.interface_radii]


def _check_start(metric: SymTensorField, x: np.ndarray, p: np.ndarray) -> float:
    metric.singular_support.check(x, GUARD_DISTANCE)
    H = hamiltonian(metric, x, p)
    if not H > 0.0:
        raise DomainError(f"Ray start needs H > 0, got {H}")
    return H


def _trace_piece(metric: SymTensorField, x: np.ndarray, p: np.ndarray, t0: float, length0: float,
                 piece: int, extra: List[Boundary], t_max: float, tol: float, max_steps: int,
                 result: TraceResult) -> Tuple[Optional[Boundary], np.ndarray, np.ndarray, float, float]:
    """Integrate across interfaces of one piece until an exit, guard or transition boundary."""
    boundaries = _interface_boundaries(metric) + _guard_boundaries(metric) + extra
    for boundary in boundaries:
        if boundary.kind == "guard":
            _arm_guard(boundary, x)
        elif boundary.kind != "exit":
            boundary.inside = _side_from_motion(boundary, x, metric.inverse_matrix(x) @ p)
    integrator = PieceIntegrator(metric, boundaries, tol)
    t, length = t0, length0

    def record(ti: float, y: np.ndarray, H: Optional[float] = None):
        result.samples.append(RayState(Point3.from_array(y[:3]), tuple(float(v) for v in y[3:6]),
                                       ti, float(y[6]), piece))
        result.hamiltonians.append(hamiltonian(metric, y[:3], y[3:6]) if H is None else H)

    def one_sided(y: np.ndarray, normal: np.ndarray, side: int) -> float:
        # H on an interface, with the metric limit from the side the covector belongs to
        q = y[3:6]
        return 0.5 * float(q @ metric.limit_inverse_matrix(y[:3], normal, side) @ q)

    while True:
        y0 = np.concatenate([x, p, [length]])
        budget = max_steps - result.steps
        boundary, t, y, steps, collapsed = integrator.run(y0, t, t_max, budget, record)
        result.steps += steps
        x, p, length = y[:3], y[3:6], float(y[6])
        if collapsed:
            record(t, y)
            result.reason = TerminationReason.TANGENCY_GUARD
            return None, x, p, t, length
        if boundary is None:
            record(t, y)
            result.reason = TerminationReason.MAX_STEPS if result.steps >= max_steps else TerminationReason.T_MAX
            return None, x, p, t, length
        if boundary.kind == "interface":
            normal = boundary.normal(x)
            direction = -boundary.inside
            record(t, y, one_sided(y, normal, -direction))
            p, reflected = refract(metric, x, p, normal, direction)
            if not reflected:
                boundary.inside = -boundary.inside
            logger.debug(f"{'Reflected' if reflected else 'Refracted'} at |x|={boundary.radius:g}, t={t:.6g}")
            y = np.concatenate([x, p, [length]])
            record(t, y, one_sided(y, normal, -direction if reflected else direction))
            continue
        record(t, y)
        if boundary.kind == "guard":
            result.reason = TerminationReason.TANGENCY_GUARD
            logger.warning(f"Tangency guard near singular set at t={t:.6g}, x={np.round(x, 9).tolist()}")
        elif boundary.kind == "exit":
            result.reason = TerminationReason.EXITED
        return boundary, x, p, t, length


def _exit_boundary(center: Sequence[float], radius: float) -> Boundary:
    return Boundary(np.asarray(center, dtype=float), float(radius), "exit", inside=-1)


def trace(
    metric: Union[SymTensorField, StoDesign],
    start: RayState,
    t_max: float = 100.0,
    tol: float = DEFAULT_TOL,
    domain_radius: Optional[float] = None,
    max_steps: int = MAX_STEPS,
) -> TraceResult:
    """
    Trace one ray through a metric field (or an STO design with chart transitions).

    Args:
        metric: Metric field, or a design whose pieces carry metrics
        start: Initial ray state
        t_max: Largest Hamiltonian parameter
        tol: Relative integration tolerance
        domain_radius: Radius of the exit sphere about the origin (defaults to
            twice the start distance, at least 4). A ray started
            outside the sphere exits on its first outward crossing
        max_steps: Accepted-step budget

    Returns:
        TraceResult

    Raises:
        DomainError: start on a singular set or with H <= 0
        ParameterError: non-positive tolerance or t_max
    """
    if not tol > 0.0:
        raise ParameterError(f"Tolerance must be positive, got {tol}")
    if not t_max > 0.0:
        raise ParameterError(f"t_max must be positive, got {t_max}")
    if isinstance(metric, StoDesign):
        return trace_design(metric, start, t_max, tol, domain_radius, max_steps)
    x, p = start.x, start.p
    H0 = _check_start(metric, x, p)
    radius = domain_radius if domain_radius is not None else max(4.0, 2.0 * float(np.linalg.norm(x)))
    result = TraceResult(samples=[], hamiltonians=[], reason=TerminationReason.T_MAX)
    result.samples.append(RayState(start.position, start.momentum, start.t, start.length, start.piece))
    result.hamiltonians.append(H0)
    _trace_piece(metric, x, p, start.t, start.length, start.piece, [_exit_boundary((0, 0, 0), radius)],
                 t_max, tol, max_steps, result)
    return result


# ============================================================================
# STO designs
# ============================================================================

def _sqrt_spd(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return (vecs * np.sqrt(vals)) @ vecs.T


def apply_transition(design: StoDesign, transition: ChartTransition, forward: bool,
                     x: np.ndarray, p: np.ndarray) -> Tuple[int, np.ndarray, np.ndarray]:
    """
    Carry a ray across a glued sphere.

    Metric-orthonormal momentum components are preserved; the normal
    component changes sign under `flip_radial`; `reflect_z` mirrors both
    position and tangential components in z.

    Returns:
        (target piece, position, covector) on the target side
    """
    if forward:
        src_piece, dst_piece = transition.source_piece, transition.target_piece
        src_c, src_r = np.asarray(transition.source_center, float), transition.source_radius
        dst_c, dst_r = np.asarray(transition.target_center, float), transition.target_radius
    else:
        src_piece, dst_piece = transition.target_piece, transition.source_piece
        src_c, src_r = np.asarray(transition.target_center, float), transition.target_radius
        dst_c, dst_r = np.asarray(transition.source_center, float), transition.source_radius
    mirror = np.diag([1.0, 1.0, -1.0]) if transition.reflect_z else np.eye(3)
    src_metric = design.pieces[src_piece].metric
    dst_metric = design.pieces[dst_piece].metric

    n = (x - src_c) / np.linalg.norm(x - src_c)
    v_hat = _sqrt_spd(src_metric.inverse_matrix(x)) @ p
    v_n = float(v_hat @ n)
    v_t = v_hat - v_n * n

    n_new = mirror @ n
    x_new = dst_c + dst_r * n_new
    v_new = mirror @ v_t + (-v_n if transition.flip_radial else v_n) * n_new
    p_new = _sqrt_spd(dst_metric.matrix(x_new)) @ v_new
    return dst_piece, x_new, p_new


def _transition_boundaries(design: StoDesign, piece: int) -> List[Boundary]:
    boundaries = []
    for transition in design.transitions:
        if transition.source_piece == piece:
            boundaries.append(Boundary(np.asarray(transition.source_center, float), transition.source_radius,
                                       "transition", transition=transition, forward=True))
        if transition.target_piece == piece:
            boundaries.append(Boundary(np.asarray(transition.target_center, float), transition.target_radius,
                                       "transition", transition=transition, forward=False))
    return boundaries


def trace_design(
    design: StoDesign,
    start: RayState,
    t_max: float = 100.0,
    tol: float = DEFAULT_TOL,
    domain_radius: Optional[float] = None,
    max_steps: int = MAX_STEPS,
) -> TraceResult:
    """
    Trace a ray across the pieces of an STO design.

    The exit sphere (about the origin) applies on the start piece only.
    """
    piece = start.piece
    if not 0 <= piece < len(design.pieces) or design.pieces[piece].metric is None:
        raise DomainError(f"Start piece {piece} of design '{design.name}' has no metric")
    x, p = start.x, start.p
    H0 = _check_start(design.pieces[piece].metric, x, p)
    radius = domain_radius if domain_radius is not None else max(4.0, 2.0 * float(np.linalg.norm(x)))
    home = piece
    result = TraceResult(samples=[start], hamiltonians=[H0], reason=TerminationReason.T_MAX)
    t, length = start.t, start.length
    while True:
        metric = design.pieces[piece].metric
        extra = _transition_boundaries(design, piece)
        if piece == home:
            extra.append(_exit_boundary((0, 0, 0), radius))
        boundary, x, p, t, length = _trace_piece(metric, x, p, t, length, piece, extra, t_max, tol,
                                                 max_steps, result)
        if boundary is None or boundary.kind != "transition":
            return result
        piece, x, p = apply_transition(design, boundary.transition, boundary.forward, x, p)
        label = boundary.transition.label or f"transition-{design.transitions.index(boundary.transition)}"
        if not boundary.forward:
            label += "^-1"
        result.transitions.append((label, t))
        logger.debug(f"Transition {label} at t={t:.6g} into piece {piece}")
        result.samples.append(RayState(Point3.from_array(x), tuple(float(v) for v in p), t, length, piece))
        result.hamiltonians.append(hamiltonian(design.pieces[piece].metric, x, p))
