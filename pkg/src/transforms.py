"""
Coordinate maps for transformation optics.

Diffeomorphisms (smooth and singular) with analytic Jacobians,
push-forward of metrics and conductivities, the blow-up / truncation
maps of the spherical cloak, and the STO design data model.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ParameterError, SingularSetError
from .geometry import (
    EMPTY_SUPPORT,
    ORIGIN_SUPPORT,
    SINGULAR_CUTOFF,
    UNIT_SPHERE_SUPPORT,
    PointLike,
    SingularSupport,
    SymTensor3,
    SymTensorField,
    as_point_array,
    euclidean_metric,
)

logger = logging.getLogger(__name__)

VectorRule = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiffeoMap:
    """
    Invertible coordinate map x -> y = F(x).

    The rules receive and return numpy arrays. `jacobian_rule` is DF at x;
    `inverse_jacobian_rule` is D(F^{-1}) at y and defaults to the matrix
    inverse of DF at F^{-1}(y).
    """

    forward_rule: VectorRule
    inverse_rule: VectorRule
    jacobian_rule: VectorRule
    inverse_jacobian_rule: Optional[VectorRule] = None
    singular_set: SingularSupport = EMPTY_SUPPORT
    image_singular_set: SingularSupport = EMPTY_SUPPORT
    name: str = "map"

    def forward(self, point: PointLike) -> np.ndarray:
        x = as_point_array(point)
        self.singular_set.check(x)
        return np.asarray(self.forward_rule(x), dtype=float)

    def inverse(self, point: PointLike) -> np.ndarray:
        y = as_point_array(point)
        self.image_singular_set.check(y)
        return np.asarray(self.inverse_rule(y), dtype=float)

    def jacobian(self, point: PointLike) -> np.ndarray:
        x = as_point_array(point)
        self.singular_set.check(x)
        return np.asarray(self.jacobian_rule(x), dtype=float)

    def inverse_jacobian(self, point: PointLike) -> np.ndarray:
        y = as_point_array(point)
        self.image_singular_set.check(y)
        if self.inverse_jacobian_rule is not None:
            return np.asarray(self.inverse_jacobian_rule(y), dtype=float)
        return np.linalg.inv(self.jacobian_rule(self.inverse_rule(y)))

    def then(self, outer: "DiffeoMap") -> "DiffeoMap":
        """Composition outer o self, with chain-rule Jacobians."""
        return compose(outer, self)


def identity_map() -> "RadialDiffeo":
    return RadialDiffeo(
        profile=lambda s: s,
        profile_derivative=lambda s: 1.0,
        inverse_profile=lambda t: t,
        inverse_profile_derivative=lambda t: 1.0,
        name="identity",
    )


def compose(outer: DiffeoMap, inner: DiffeoMap) -> DiffeoMap:
    """
    Composition outer o inner.

    Args:
        outer: Map applied second (G)
        inner: Map applied first (F)

    Returns:
        DiffeoMap for G o F
    """
    return DiffeoMap(
        forward_rule=lambda x: outer.forward(inner.forward(x)),
        inverse_rule=lambda y: inner.inverse(outer.inverse(y)),
        jacobian_rule=lambda x: outer.jacobian(inner.forward(x)) @ inner.jacobian(x),
        inverse_jacobian_rule=lambda y: inner.inverse_jacobian(outer.inverse(y)) @ outer.inverse_jacobian(y),
        singular_set=inner.singular_set,
        image_singular_set=outer.image_singular_set,
        name=f"{outer.name}o{inner.name}",
    )


def _radial_jacobian(x: np.ndarray, h: float, dh: float, dh_zero: float) -> np.ndarray:
    s = float(np.linalg.norm(x))
    if s < 1e-300:
        return dh_zero * np.eye(3)
    e = x / s
    proj = np.outer(e, e)
    return dh * proj + (h / s) * (np.eye(3) - proj)


class RadialDiffeo(DiffeoMap):
    """
    Radial map F(x) = h(|x|) x / |x| with h increasing.

    The forward domain is |x| > domain_floor (or all of R^3 when the floor is
    None); the image is |y| > image_floor. Points on the wrong side of a floor
    raise SingularSetError when the map is singular there and DomainError
    otherwise.
    """

    def __init__(
        self,
        profile: Callable[[float], float],
        profile_derivative: Callable[[float], float],
        inverse_profile: Callable[[float], float],
        inverse_profile_derivative: Callable[[float], float],
        domain_floor: Optional[float] = None,
        image_floor: Optional[float] = None,
        singular: bool = False,
        name: str = "radial",
    ):
        object.__setattr__(self, "profile", profile)
        object.__setattr__(self, "profile_derivative", profile_derivative)
        object.__setattr__(self, "inverse_profile", inverse_profile)
        object.__setattr__(self, "inverse_profile_derivative", inverse_profile_derivative)
        object.__setattr__(self, "domain_floor", domain_floor)
        object.__setattr__(self, "image_floor", image_floor)
        object.__setattr__(self, "singular", singular)

        def forward_rule(x: np.ndarray) -> np.ndarray:
            s = self._check_floor(x, domain_floor)
            return x * (profile(s) / s) if s > 0 else np.zeros(3)

        def inverse_rule(y: np.ndarray) -> np.ndarray:
            t = self._check_floor(y, image_floor)
            return y * (inverse_profile(t) / t) if t > 0 else np.zeros(3)

        def jacobian_rule(x: np.ndarray) -> np.ndarray:
            s = self._check_floor(x, domain_floor)
            h = profile(s) if s > 0 else 0.0
            return _radial_jacobian(x, h, profile_derivative(s), profile_derivative(0.0))

        def inverse_jacobian_rule(y: np.ndarray) -> np.ndarray:
            t = self._check_floor(y, image_floor)
            h = inverse_profile(t) if t > 0 else 0.0
            return _radial_jacobian(y, h, inverse_profile_derivative(t), inverse_profile_derivative(0.0))

        super().__init__(
            forward_rule=forward_rule,
            inverse_rule=inverse_rule,
            jacobian_rule=jacobian_rule,
            inverse_jacobian_rule=inverse_jacobian_rule,
            singular_set=ORIGIN_SUPPORT if singular and domain_floor == 0.0 else EMPTY_SUPPORT,
            image_singular_set=UNIT_SPHERE_SUPPORT if singular and image_floor == 1.0 else EMPTY_SUPPORT,
            name=name,
        )

    def _check_floor(self, point: np.ndarray, floor: Optional[float]) -> float:
        s = float(np.linalg.norm(point))
        if floor is not None and s <= floor + SINGULAR_CUTOFF:
            if self.singular:
                raise SingularSetError(f"{self.name}: |x|={s:.6g} is on or inside the singular set (radius {floor})")
            raise DomainError(f"{self.name}: |x|={s:.6g} is outside the domain |x|>{floor}")
        return s


def blowup_point_map() -> RadialDiffeo:
    """
    Singular map blowing the origin up to the unit sphere.

    F_1(x) = (|x|/2 + 1) x/|x| on 0 < |x| <= 2 and the identity beyond,
    so the open annulus 1 < |y| < 2 is the image of the punctured ball.
    """
    return RadialDiffeo(
        profile=lambda s: s / 2.0 + 1.0 if s <= 2.0 else s,
        profile_derivative=lambda s: 0.5 if s <= 2.0 else 1.0,
        inverse_profile=lambda t: 2.0 * (t - 1.0) if t <= 2.0 else t,
        inverse_profile_derivative=lambda t: 2.0 if t <= 2.0 else 1.0,
        domain_floor=0.0,
        image_floor=1.0,
        singular=True,
        name="blowup",
    )


def truncation_radius(R: float) -> float:
    """Inner radius rho = 2(R - 1) of the pulled-back annulus."""
    if not 1.0 < R < 2.0:
        raise ParameterError(f"Truncation radius R must lie in (1, 2), got {R}")
    return 2.0 * (R - 1.0)


def truncation_map(R: float) -> RadialDiffeo:
    """
    Nonsingular truncation F_R of the blow-up map.

    Maps {|y| > rho} onto {|x| > R} with rho = 2(R-1): the affine rule
    |y|/2 + 1 on rho < |y| <= 2 and the identity for |y| > 2.

    Args:
        R: Truncation radius in (1, 2)

    Raises:
        ParameterError: R outside (1, 2)
    """
    rho = truncation_radius(R)
    return RadialDiffeo(
        profile=lambda s: s / 2.0 + 1.0 if s <= 2.0 else s,
        profile_derivative=lambda s: 0.5 if s <= 2.0 else 1.0,
        inverse_profile=lambda t: 2.0 * (t - 1.0) if t <= 2.0 else t,
        inverse_profile_derivative=lambda t: 2.0 if t <= 2.0 else 1.0,
        domain_floor=rho,
        image_floor=R,
        singular=False,
        name=f"truncation(R={R:g})",
    )


def smooth_radial_map(eps: float) -> RadialDiffeo:
    """
    Smooth radial diffeomorphism of B(0, 2) fixing the boundary sphere.

    h(s) = s + eps * s * (s^2 - 4) on s <= 2, identity beyond. Increasing
    for -1/8 < eps < 1/4.
    """
    if not -0.125 < eps < 0.25:
        raise ParameterError(f"Smooth radial map needs -1/8 < eps < 1/4, got {eps}")

    def h(s: float) -> float:
        return s + eps * s * (s * s - 4.0) if s <= 2.0 else s

    def dh(s: float) -> float:
        return 1.0 + eps * (3.0 * s * s - 4.0) if s <= 2.0 else 1.0

    def h_inv(t: float) -> float:
        if t > 2.0 or eps == 0.0:
            return t
        if t <= 0.0:
            return 0.0
        return brentq(lambda s: h(s) - t, 0.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    return RadialDiffeo(
        profile=h,
        profile_derivative=dh,
        inverse_profile=h_inv,
        inverse_profile_derivative=lambda t: 1.0 / dh(h_inv(t)),
        name=f"smooth(eps={eps:g})",
    )


# ============================================================================
# Push-forwards
# ============================================================================

def pushforward_metric(F: DiffeoMap, g: SymTensorField, y: PointLike) -> SymTensor3:
    """
    Push-forward metric (F_* g)(y) = J^T g(F^{-1} y) J with J = D(F^{-1})(y).

    Args:
        F: Coordinate map
        g: Metric field on the source side
        y: Point in the image

    Returns:
        Covariant metric components at y
    """
    y_arr = as_point_array(y)
    x = F.inverse(y_arr)
    jac = F.inverse_jacobian(y_arr)
    return SymTensor3.from_matrix(jac.T @ g(x).matrix @ jac)


def pushforward_conductivity(F: DiffeoMap, sigma: SymTensorField, y: PointLike) -> SymTensor3:
    """
    Push-forward conductivity (F_* sigma)(y) = DF sigma DF^T / |det DF| at x = F^{-1}(y).

    This places DF on the contravariant indices, which is the reading that
    agrees with metric_to_conductivity(pushforward_metric(F, g)).
    """
    y_arr = as_point_array(y)
    x = F.inverse(y_arr)
    jac = np.linalg.inv(F.inverse_jacobian(y_arr))
    det = abs(float(np.linalg.det(jac)))
    if det == 0.0:
        raise SingularSetError(f"Jacobian of {F.name} is degenerate at {y_arr.tolist()}")
    return SymTensor3.from_matrix(jac @ sigma(x).matrix @ jac.T / det)


def pushforward_metric_field(F: DiffeoMap, g: SymTensorField) -> SymTensorField:
    """Field y -> (F_* g)(y) carrying the image singular set."""
    return SymTensorField(
        rule=lambda y: pushforward_metric(F, g, y).matrix,
        singular_support=F.image_singular_set,
        name=f"{F.name}_*{g.name}",
    )


def pushforward_conductivity_field(F: DiffeoMap, sigma: SymTensorField) -> SymTensorField:
    return SymTensorField(
        rule=lambda y: pushforward_conductivity(F, sigma, y).matrix,
        singular_support=F.image_singular_set,
        name=f"{F.name}_*{sigma.name}",
    )


# ============================================================================
# Jacobian conditions near a blow-up point
# ============================================================================

@dataclass
class SingularMapReport:
    """Largest constants c0, c1 with dF >= c0 I and det dF >= c1 / dist seen on the samples."""

    map_name: str
    c0: float
    c1: float
    c0_threshold: float
    c1_threshold: float
    samples: int
    outside_domain: int
    min_distance: float
    reasons: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.reasons

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{self.map_name}: {status} c0={self.c0:.6g} c1={self.c1:.6g} ({self.samples} samples)"
        if self.reasons:
            text += " - " + "; ".join(self.reasons)
        return text


def validate_singular_map(
    F: DiffeoMap,
    gamma: Sequence[float] = (0.0, 0.0, 0.0),
    samples: int = 200,
    c0_threshold: float = 1e-3,
    c1_threshold: float = 1e-3,
    d_max: float = 1.0,
    d_min: float = 1e-6,
    seed: int = 0,
) -> SingularMapReport:
    """
    Check the Jacobian conditions of a blow-up map near the point gamma.

    Samples points at distances geometrically spaced from d_max down to
    d_min in seeded random directions, and records
    c0 = min smallest singular value of DF and c1 = min det(DF) * dist.

    Args:
        F: Map defined off gamma
        gamma: Blow-up point
        samples: Number of sample points
        c0_threshold: Required lower bound for c0
        c1_threshold: Required lower bound for c1
        d_max: Largest sampled distance
        d_min: Smallest sampled distance
        seed: Random seed for directions

    Returns:
        SingularMapReport (never raises for a failing map)
    """
    if samples < 1:
        raise ParameterError(f"samples must be positive, got {samples}")
    center = as_point_array(gamma)
    rng = np.random.default_rng(seed)
    distances = np.geomspace(d_max, d_min, samples)
    directions = rng.normal(size=(samples, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    c0 = math.inf
    c1 = math.inf
    outside = 0
    for d, direction in zip(distances, directions):
        x = center + d * direction
        try:
            jac = F.jacobian(x)
        except DomainError:
            outside += 1
            continue
        c0 = min(c0, float(np.linalg.svd(jac, compute_uv=False)[-1]))
        c1 = min(c1, abs(float(np.linalg.det(jac))) * d)

    reasons = []
    if outside:
        reasons.append(f"{outside} sample(s) outside the map domain")
    if outside < samples:
        if c0 < c0_threshold:
            reasons.append(f"c0={c0:.3g} below threshold {c0_threshold:g}")
        if c1 < c1_threshold:
            reasons.append(f"c1={c1:.3g} below threshold {c1_threshold:g} (determinant does not blow up)")
    else:
        c0 = c1 = float("nan")

    report = SingularMapReport(
        map_name=F.name,
        c0=c0,
        c1=c1,
        c0_threshold=c0_threshold,
        c1_threshold=c1_threshold,
        samples=samples,
        outside_domain=outside,
        min_distance=d_min,
        reasons=reasons,
    )
    logger.debug(report.summary())
    return report


# ============================================================================
# STO design data model
# ============================================================================

@dataclass(frozen=True)
class ManifoldPiece:
    """
    One piece of an STO design.

    Attributes:
        name: Piece label
        domain: Human-readable domain description
        metric: Metric field on the piece (None for abstract pieces)
        blowup: Optional blow-up submanifold (a point, stored as coordinates)
        blowup_dimension: Dimension of the blow-up submanifold
    """

    name: str
    domain: str
    metric: Optional[SymTensorField] = None
    blowup: Optional[Tuple[float, float, float]] = None
    blowup_dimension: int = 0


@dataclass(frozen=True)
class DeviceRegion:
    """Device region N_j with its interface surface Sigma_j (a sphere)."""

    name: str
    domain: str
    interface_center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    interface_radius: float = 1.0


@dataclass(frozen=True)
class ChartTransition:
    """
    Gluing rule between a boundary sphere of one piece and another.

    Position on the source sphere (unit normal n) is carried to the target
    sphere; `reflect_z` mirrors the normal's z-component. Momentum components
    in the metric-orthonormal frame are preserved and the radial component
    changes sign when `flip_radial` is set.
    """

    source_piece: int
    target_piece: int
    source_center: Tuple[float, float, float]
    source_radius: float
    target_center: Tuple[float, float, float]
    target_radius: float
    reflect_z: bool = False
    flip_radial: bool = True
    label: str = ""


@dataclass(frozen=True)
class StoDesign:
    """Triplet (manifold pieces, device regions, maps) of a singular transformation optics design."""

    pieces: Tuple[ManifoldPiece, ...]
    regions: Tuple[DeviceRegion, ...] = ()
    maps: Tuple[Tuple[int, int, DiffeoMap], ...] = ()
    transitions: Tuple[ChartTransition, ...] = ()
    parameters: dict = field(default_factory=dict)
    name: str = "sto"

    def __post_init__(self):
        n_pieces = len(self.pieces)
        for source, target, _ in self.maps:
            if not (0 <= source < n_pieces and 0 <= target < len(self.regions)):
                raise DomainError(f"Map indices ({source}, {target}) do not match the design")
        for transition in self.transitions:
            if not (0 <= transition.source_piece < n_pieces and 0 <= transition.target_piece < n_pieces):
                raise DomainError(f"Transition '{transition.label}' references a missing piece")
        for piece in self.pieces:
            # blow-up submanifolds have codimension at least 2
            if piece.blowup is not None and piece.blowup_dimension > 1:
                raise DomainError(f"Blow-up set of '{piece.name}' has dimension {piece.blowup_dimension} > n-2")


def single_coating_design() -> StoDesign:
    """
    Single-coating cloak as an STO design.

    M = (R^3, B(0,1)) with Euclidean metrics, N = (shell 1<|y|<2 with
    exterior, hidden ball), F = (F_1 blowing up the origin, identity).
    """
    flat = euclidean_metric()
    pieces = (
        ManifoldPiece("M1", "R^3", flat, blowup=(0.0, 0.0, 0.0), blowup_dimension=0),
        ManifoldPiece("M2", "B(0,1)", flat),
    )
    regions = (
        DeviceRegion("N1", "R^3 minus closed B(0,1)", interface_radius=1.0),
        DeviceRegion("N2", "B(0,1)", interface_radius=1.0),
    )
    maps = ((0, 0, blowup_point_map()), (1, 1, identity_map()))
    return StoDesign(pieces=pieces, regions=regions, maps=maps, name="single-coating")
