"""
Material-parameter generators for the spherical cloak family.

Radial medium profiles (ideal, truncated, layered isotropic, quantum),
the Maxwell tensor pair and the wormhole geometry descriptor.

A RadialMediumProfile lists intervals of (0, 2]. On each interval the
medium is described by its orthonormal-frame conductivity eigenvalues
a(r) (radial) and b(r) (tangential), the bulk density w(r) = |g|^{1/2}
and an optional potential V(r). An interval is one of:

- constant: a, b, w, V constant (closed-form Bessel/power solutions)
- chart: push-forward of a constant medium by a radial chart y(r)
- rule: arbitrary coefficient callable (integrated numerically)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError, ParameterError
from .geometry import (
    UNIT_SPHERE_SUPPORT,
    PointLike,
    RadialSymTensorField,
    SymTensor3,
    as_point_array,
    euclidean_metric,
    radial_tensor_matrix,
)
from .transforms import (
    ChartTransition,
    ManifoldPiece,
    StoDesign,
    truncation_radius,
)

logger = logging.getLogger(__name__)

OUTER_RADIUS = 2.0

RadialRule = Callable[[float], float]
Potential = Union[float, RadialRule, None]


class RadialCoefficients(NamedTuple):
    radial: float
    tangential: float
    bulk: float
    potential: float


@dataclass(frozen=True)
class ConstantMedium:
    """Constant coefficients (a, b, w, V)."""

    radial: float
    tangential: float
    bulk: float
    potential: float = 0.0

    def coefficients(self) -> RadialCoefficients:
        return RadialCoefficients(self.radial, self.tangential, self.bulk, self.potential)


@dataclass(frozen=True)
class RadialChart:
    """
    Push-forward of a constant medium by the radial chart r -> y(r).

    With y' = dy/dr the pushed coefficients are
    a = a0 y^2 / (y' r^2), b = b0 y', w = w0 y' y^2 / r^2, V = V0 y' y^2 / r^2,
    and a solution is u(r) = v(y(r)) for v solving the constant medium.
    """

    position: RadialRule
    derivative: RadialRule
    base: ConstantMedium
    name: str = "chart"

    def coefficients(self, r: float) -> RadialCoefficients:
        y = self.position(r)
        dy = self.derivative(r)
        density = dy * y * y / (r * r)
        return RadialCoefficients(
            self.base.radial * y * y / (dy * r * r),
            self.base.tangential * dy,
            self.base.bulk * density,
            self.base.potential * density,
        )

    def flux_coefficient(self, r: float) -> float:
        y = self.position(r)
        return self.base.radial * y * y / self.derivative(r)


@dataclass(frozen=True)
class RadialInterval:
    """
    One interval (r_inner, r_outer] of a radial profile.

    Exactly one of medium / chart / rule describes the coefficients.
    `bulk_profile` optionally replaces the constant bulk density of a
    constant medium. `weight` is the transmission weight t = gamma^{1/2}
    of the Schrodinger form (1 for acoustic media).
    """

    r_inner: float
    r_outer: float
    medium: Optional[ConstantMedium] = None
    chart: Optional[RadialChart] = None
    rule: Optional[Callable[[float], RadialCoefficients]] = None
    bulk_profile: Optional[RadialRule] = None
    weight: float = 1.0
    label: str = ""

    def __post_init__(self):
        given = sum(x is not None for x in (self.medium, self.chart, self.rule))
        if given != 1:
            raise DomainError(f"Interval '{self.label}' needs exactly one of medium, chart or rule")
        if not 0.0 <= self.r_inner < self.r_outer:
            raise DomainError(f"Interval '{self.label}' has bad bounds ({self.r_inner}, {self.r_outer}]")
        if not self.weight > 0.0:
            raise DomainError(f"Interval '{self.label}' has non-positive weight {self.weight}")

    @property
    def kind(self) -> str:
        if self.chart is not None:
            return "chart"
        if self.rule is not None or self.bulk_profile is not None:
            return "rule"
        return "constant"

    def coefficients(self, r: float) -> RadialCoefficients:
        if self.chart is not None:
            return self.chart.coefficients(r)
        if self.rule is not None:
            return RadialCoefficients(*self.rule(r))
        c = self.medium.coefficients()
        if self.bulk_profile is not None:
            return c._replace(bulk=self.bulk_profile(r))
        return c

    def flux_coefficient(self, r: float) -> float:
        """Radial flux coefficient A(r) = r^2 a(r)."""
        if self.chart is not None:
            return self.chart.flux_coefficient(r)
        return r * r * self.coefficients(r).radial

    @property
    def degenerate_inner(self) -> bool:
        """True when A vanishes at a positive inner radius (a cloaking surface)."""
        return self.r_inner > 0.0 and self.flux_coefficient(self.r_inner) == 0.0

    def is_constant_at(self, omega_squared: float) -> bool:
        """Whether the closed-form constant-medium solutions apply at this frequency."""
        if self.medium is None:
            return False
        return self.bulk_profile is None or omega_squared == 0.0


@dataclass(frozen=True)
class RadialMediumProfile:
    """Piecewise radial medium partitioning (0, 2]."""

    intervals: Tuple[RadialInterval, ...]
    name: str = "profile"
    parameters: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.intervals:
            raise DomainError("Profile has no intervals")
        if self.intervals[0].r_inner != 0.0:
            raise DomainError(f"Profile '{self.name}' must start at r=0")
        if self.intervals[-1].r_outer != OUTER_RADIUS:
            raise DomainError(f"Profile '{self.name}' must end at r={OUTER_RADIUS}")
        for left, right in zip(self.intervals, self.intervals[1:]):
            if left.r_outer != right.r_inner:
                raise DomainError(
                    f"Profile '{self.name}' intervals do not partition (0, 2]: "
                    f"{left.r_outer} != {right.r_inner}"
                )
        for interval in self.intervals:
            for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
                r = interval.r_inner + frac * (interval.r_outer - interval.r_inner)
                c = interval.coefficients(r)
                if not (c.radial > 0.0 and c.tangential > 0.0 and c.bulk > 0.0):
                    raise DomainError(
                        f"Profile '{self.name}' is degenerate at r={r:.6g} "
                        f"(a={c.radial:.3g}, b={c.tangential:.3g}, w={c.bulk:.3g})"
                    )
                if not math.isfinite(c.potential):
                    raise DomainError(f"Profile '{self.name}' has non-finite potential at r={r:.6g}")

    @property
    def interface_radii(self) -> List[float]:
        return [interval.r_outer for interval in self.intervals[:-1]]

    def interval_index(self, r: float, side: int = -1) -> int:
        """
        Index of the interval containing r.

        At an interface radius, side=-1 picks the inner interval and
        side=+1 the outer one.
        """
        if not 0.0 <= r <= OUTER_RADIUS:
            raise DomainError(f"Radius {r} outside [0, {OUTER_RADIUS}]")
        for i, interval in enumerate(self.intervals):
            if r < interval.r_outer or (r == interval.r_outer and (side < 0 or i == len(self.intervals) - 1)):
                return i
        return len(self.intervals) - 1

    def coefficients(self, r: float, side: int = -1) -> RadialCoefficients:
        return self.intervals[self.interval_index(r, side)].coefficients(r)

    def radial(self, r: float, side: int = -1) -> float:
        return self.coefficients(r, side).radial

    def tangential(self, r: float, side: int = -1) -> float:
        return self.coefficients(r, side).tangential

    def bulk(self, r: float, side: int = -1) -> float:
        return self.coefficients(r, side).bulk

    def potential(self, r: float, side: int = -1) -> float:
        return self.coefficients(r, side).potential

    def flux_coefficient(self, r: float, side: int = -1) -> float:
        return self.intervals[self.interval_index(r, side)].flux_coefficient(r)

    def weight(self, r: float, side: int = -1) -> float:
        return self.intervals[self.interval_index(r, side)].weight

    def sample(self, points: int = 50) -> pd.DataFrame:
        """
        Sample the coefficients on the midpoint grid r_k = (k + 1/2) * 2 / points.

        Returns:
            DataFrame with columns r, radial, tangential, bulk, bulk_squared,
            potential, flux_coefficient, weight
        """
        if points < 1:
            raise ParameterError(f"points must be positive, got {points}")
        radii = (np.arange(points) + 0.5) * (OUTER_RADIUS / points)
        rows = []
        for r in radii:
            interval = self.intervals[self.interval_index(float(r))]
            c = interval.coefficients(float(r))
            rows.append({
                "r": float(r),
                "radial": c.radial,
                "tangential": c.tangential,
                "bulk": c.bulk,
                "bulk_squared": c.bulk * c.bulk,
                "potential": c.potential,
                "flux_coefficient": interval.flux_coefficient(float(r)),
                "weight": interval.weight,
            })
        return pd.DataFrame(rows)

    def to_records(self, samples_per_interval: int = 5) -> Dict[str, Any]:
        """Structured description: interval list with coefficient samples."""
        intervals = []
        for interval in self.intervals:
            fracs = (np.arange(samples_per_interval) + 0.5) / samples_per_interval
            samples = []
            for frac in fracs:
                r = interval.r_inner + float(frac) * (interval.r_outer - interval.r_inner)
                c = interval.coefficients(r)
                samples.append({"r": r, "radial": c.radial, "tangential": c.tangential,
                                "bulk": c.bulk, "potential": c.potential})
            intervals.append({
                "r_inner": interval.r_inner,
                "r_outer": interval.r_outer,
                "kind": interval.kind,
                "label": interval.label,
                "weight": interval.weight,
                "degenerate_inner": interval.degenerate_inner,
                "samples": samples,
            })
        return {"name": self.name, "outer_radius": OUTER_RADIUS, "intervals": intervals}


# ============================================================================
# Profile generators
# ============================================================================

CLOAK_BASE = ConstantMedium(radial=1.0, tangential=1.0, bulk=1.0)
HIDDEN_MEDIUM = ConstantMedium(radial=2.0, tangential=2.0, bulk=8.0)


def cloak_chart() -> RadialChart:
    """Chart y(r) = 2(r - 1) pulling the cloak shell back to free space."""
    return RadialChart(
        position=lambda r: 2.0 * (r - 1.0),
        derivative=lambda r: 2.0,
        base=CLOAK_BASE,
        name="blowup-inverse",
    )


def cloak_shell_radial(r: float) -> float:
    """Orthonormal radial eigenvalue 2(r-1)^2 / r^2 of the cloak conductivity."""
    return 2.0 * (r - 1.0) ** 2 / (r * r)


def cloak_shell_bulk(r: float) -> float:
    """Bulk density |g|^{1/2} = 8(r-1)^2 / r^2 on the cloak shell."""
    return 8.0 * (r - 1.0) ** 2 / (r * r)


def homogeneous_profile(conductivity: float = 1.0, bulk: float = 1.0, potential: float = 0.0) -> RadialMediumProfile:
    """Single constant isotropic medium on B(0, 2)."""
    medium = ConstantMedium(conductivity, conductivity, bulk, potential)
    return RadialMediumProfile(
        intervals=(RadialInterval(0.0, OUTER_RADIUS, medium=medium, label="ball"),),
        name="homogeneous",
    )


def ideal_cloak_profile() -> RadialMediumProfile:
    """
    Ideal spherical cloak.

    On 1 < r < 2 the conductivity has eigenvalues 2(r-1)^2/r^2 (radial) and
    2 (tangential), so the flux coefficient r^2 a(r) = 2(r-1)^2 vanishes at
    the cloaking surface; w = 8(r-1)^2/r^2. Inside B(0,1) the medium is
    isotropic 2 with w = 8.
    """
    return RadialMediumProfile(
        intervals=(
            RadialInterval(0.0, 1.0, medium=HIDDEN_MEDIUM, label="hidden"),
            RadialInterval(1.0, OUTER_RADIUS, chart=cloak_chart(), label="cloak-shell"),
        ),
        name="ideal-cloak",
    )


def truncated_cloak_profile(R: float) -> RadialMediumProfile:
    """
    Truncated cloak sigma_R: the ideal shell on (R, 2), isotropic 2 with w = 8 on (0, R).

    Raises:
        ParameterError: R outside (1, 2)
    """
    truncation_radius(R)
    return RadialMediumProfile(
        intervals=(
            RadialInterval(0.0, R, medium=HIDDEN_MEDIUM, label="hidden"),
            RadialInterval(R, OUTER_RADIUS, chart=cloak_chart(), label="cloak-shell"),
        ),
        name=f"truncated-cloak(R={R:g})",
        parameters={"R": R},
    )


def laminate_phases(radial: float, tangential: float) -> Tuple[float, float]:
    """
    Two equal-thickness isotropic phases with harmonic mean `radial` and arithmetic mean `tangential`.

    Returns:
        (high, low) = b +/- sqrt(b (b - a))

    Raises:
        DomainError: a > b (no real laminate)
    """
    a, b = radial, tangential
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"Laminate targets must be positive, got ({a}, {b})")
    gap = b * (b - a)
    if gap < 0.0:
        if gap > -1e-14 * b * b:
            gap = 0.0
        else:
            raise DomainError(f"No laminate with harmonic mean {a} above arithmetic mean {b}")
    root = math.sqrt(gap)
    return b + root, b - root


def _shell_edges(R: float, layers: int) -> np.ndarray:
    if layers < 1:
        raise ParameterError(f"Layer count must be at least 1, got {layers}")
    truncation_radius(R)
    edges = np.linspace(R, OUTER_RADIUS, 2 * layers + 1)
    edges[-1] = OUTER_RADIUS
    return edges


def layered_isotropic_profile(R: float, layers: int, bulk_mode: str = "exact") -> RadialMediumProfile:
    """
    Layered isotropic approximation of the truncated cloak.

    2n equal-thickness shells fill (R, 2). Each consecutive pair carries the
    laminate phases (high first) matching the truncated-cloak eigenvalues at
    the pair midpoint.

    Args:
        R: Truncation radius in (1, 2)
        layers: Number of shell pairs n
        bulk_mode: "exact" keeps w(r) = 8(r-1)^2/r^2 on the shells;
                   "average" uses its shell average (constant per shell)

    Returns:
        RadialMediumProfile with 2n + 1 intervals
    """
    if bulk_mode not in ("exact", "average"):
        raise ParameterError(f"Unknown bulk mode: {bulk_mode}")
    edges = _shell_edges(R, layers)
    intervals = [RadialInterval(0.0, R, medium=HIDDEN_MEDIUM, label="hidden")]
    for k in range(layers):
        r0, r_mid, r1 = edges[2 * k], edges[2 * k + 1], edges[2 * k + 2]
        high, low = laminate_phases(cloak_shell_radial(r_mid), 2.0)
        for (lo, hi), phase, tag in (((r0, r_mid), high, "high"), ((r_mid, r1), low, "low")):
            lo, hi = float(lo), float(hi)
            if bulk_mode == "average":
                medium = ConstantMedium(phase, phase, shell_average_bulk(lo, hi))
                intervals.append(RadialInterval(lo, hi, medium=medium, label=f"pair{k}-{tag}"))
            else:
                medium = ConstantMedium(phase, phase, cloak_shell_bulk(0.5 * (lo + hi)))
                intervals.append(RadialInterval(lo, hi, medium=medium, bulk_profile=cloak_shell_bulk,
                                                label=f"pair{k}-{tag}"))
    logger.debug(f"Layered profile R={R} n={layers}: {len(intervals)} intervals")
    return RadialMediumProfile(
        intervals=tuple(intervals),
        name=f"layered(R={R:g}, n={layers})",
        parameters={"R": R, "layers": layers, "bulk_mode": bulk_mode},
    )


def shell_average_bulk(r0: float, r1: float) -> float:
    """Average of 8(r-1)^2/r^2 over (r0, r1)."""
    h = r1 - r0
    return 8.0 * (h - 2.0 * math.log(r1 / r0) + (1.0 / r0 - 1.0 / r1)) / h


def default_truncation(layers: int) -> float:
    """Truncation schedule R(n) = 1 + 1/n^2 (1.5 for a single pair)."""
    return 1.0 + 1.0 / (layers * layers) if layers > 1 else 1.5


@dataclass(frozen=True)
class QuantumCloakSpec:
    """
    Approximate quantum cloak parameters.

    Attributes:
        layers: Shell pair count n (>= 1)
        energy: Target energy E
        truncation: R(n) in (1, 2); defaults to 1 + 1/n^2
        interior_potential: W on B(0, 1): constant, radial callable or None
    """

    layers: int
    energy: float
    truncation: Optional[float] = None
    interior_potential: Potential = None

    def __post_init__(self):
        if self.layers < 1:
            raise ParameterError(f"Layer count must be at least 1, got {self.layers}")
        if not math.isfinite(self.energy):
            raise ParameterError(f"Energy must be finite, got {self.energy}")
        truncation_radius(self.resolved_truncation)

    @property
    def resolved_truncation(self) -> float:
        return self.truncation if self.truncation is not None else default_truncation(self.layers)


def potential_interval(r0: float, r1: float, W: Potential, weight: float, label: str) -> RadialInterval:
    """Schrodinger interval with a = b = w = 1 and potential W (constant, callable or None)."""
    if W is None or (not callable(W) and float(W) == 0.0):
        return RadialInterval(r0, r1, medium=ConstantMedium(1.0, 1.0, 1.0, 0.0), weight=weight, label=label)
    if callable(W):
        return RadialInterval(
            r0, r1, rule=lambda r: RadialCoefficients(1.0, 1.0, 1.0, float(W(r))), weight=weight, label=label
        )
    return RadialInterval(r0, r1, medium=ConstantMedium(1.0, 1.0, 1.0, float(W)), weight=weight, label=label)


def quantum_potential_profile(spec: QuantumCloakSpec) -> RadialMediumProfile:
    """
    Schrodinger profile of the approximate quantum cloak.

    The unknown is psi = gamma^{1/2} u with gamma the layered conductivity.
    Inside each shell gamma is constant, so the Laplacian term of
    V = gamma^{-1/2} Lap gamma^{1/2} - E gamma^{-1} g^{1/2} + E vanishes and
    V = E - E w / gamma with w the shell-averaged bulk density. The
    distributional part becomes the transmission rule at each interface:
    psi / t and t psi' are continuous with t = gamma^{1/2}.

    Inside B(0, R) gamma = 2 and w = 2 so V = 0, and W acts on B(0, 1).
    """
    R = spec.resolved_truncation
    E = spec.energy
    W = spec.interior_potential
    hidden_weight = math.sqrt(2.0)
    intervals = [potential_interval(0.0, 1.0, W, hidden_weight, "hidden-core")]
    intervals.append(RadialInterval(1.0, R, medium=ConstantMedium(1.0, 1.0, 1.0, 0.0),
                                    weight=hidden_weight, label="hidden-gap"))
    edges = _shell_edges(R, spec.layers)
    for k in range(spec.layers):
        r0, r_mid, r1 = (float(v) for v in edges[2 * k:2 * k + 3])
        high, low = laminate_phases(cloak_shell_radial(r_mid), 2.0)
        for lo, hi, gamma, tag in ((r0, r_mid, high, "high"), (r_mid, r1, low, "low")):
            V = E - E * shell_average_bulk(lo, hi) / gamma
            intervals.append(RadialInterval(
                lo, hi, medium=ConstantMedium(1.0, 1.0, 1.0, V), weight=math.sqrt(gamma), label=f"pair{k}-{tag}"
            ))
    return RadialMediumProfile(
        intervals=tuple(intervals),
        name=f"quantum(n={spec.layers}, E={E:g})",
        parameters={"R": R, "layers": spec.layers, "energy": E},
    )


def free_quantum_profile(interior_potential: Potential = None) -> RadialMediumProfile:
    """Free Schrodinger medium (a = b = w = 1) with an optional potential on B(0, 1)."""
    if interior_potential is None:
        return homogeneous_profile()
    return RadialMediumProfile(
        intervals=(
            potential_interval(0.0, 1.0, interior_potential, 1.0, "core"),
            RadialInterval(1.0, OUTER_RADIUS, medium=ConstantMedium(1.0, 1.0, 1.0, 0.0), label="free"),
        ),
        name="free-schrodinger",
    )


def pushforward_profile(profile: RadialMediumProfile, inverse_position: RadialRule,
                        inverse_derivative: RadialRule, name: str = "") -> RadialMediumProfile:
    """
    Push a single-interval constant profile forward by a radial diffeo of B(0, 2).

    Args:
        profile: Homogeneous profile (one constant interval)
        inverse_position: y(r), the inverse radial profile of the diffeo
        inverse_derivative: y'(r)

    Returns:
        Profile whose only interval is a chart interval
    """
    if len(profile.intervals) != 1 or profile.intervals[0].medium is None:
        raise DomainError("pushforward_profile expects a single constant interval")
    chart = RadialChart(inverse_position, inverse_derivative, profile.intervals[0].medium, name=name or "pushforward")
    return RadialMediumProfile(
        intervals=(RadialInterval(0.0, OUTER_RADIUS, chart=chart, label="pushed"),),
        name=name or f"pushforward({profile.name})",
    )


# ============================================================================
# Tensor fields
# ============================================================================

def maxwell_cloak_tensors(point: PointLike) -> Tuple[SymTensor3, SymTensor3]:
    """
    Permittivity and permeability of the ideal cloak (identical tensors).

    Equal to the cloak conductivity on 1 < |x| < 2 and the identity inside
    the hidden ball and outside B(0, 2).

    Raises:
        SingularSetError: |x| within the cutoff of the cloaking surface
    """
    x = as_point_array(point)
    r = float(np.linalg.norm(x))
    UNIT_SPHERE_SUPPORT.check(x)
    if 1.0 < r < OUTER_RADIUS:
        tensor = SymTensor3.from_matrix(radial_tensor_matrix(x, cloak_shell_radial(r), 2.0))
    else:
        tensor = SymTensor3.identity()
    return tensor, tensor


def cloak_conductivity_field() -> RadialSymTensorField:
    """Ideal cloak conductivity as a Cartesian field (identity off the shell)."""
    return RadialSymTensorField(
        radial=lambda s: cloak_shell_radial(s) if 1.0 < s <= OUTER_RADIUS else 1.0,
        tangential=lambda s: 2.0 if 1.0 < s <= OUTER_RADIUS else 1.0,
        singular_support=UNIT_SPHERE_SUPPORT,
        interface_radii=(OUTER_RADIUS,),
        name="cloak-conductivity",
    )


def cloak_metric_field() -> RadialSymTensorField:
    """
    Cloak metric g = det(sigma) sigma^{-1}: radial 4 and tangential 4(s-1)^2/s^2 on the shell.

    Euclidean elsewhere; the radial eigenvalue jumps at |y| = 2.
    """
    def radial(s: float) -> float:
        return 4.0 if 1.0 < s <= OUTER_RADIUS else 1.0

    def tangential(s: float) -> float:
        return 4.0 * (s - 1.0) ** 2 / (s * s) if 1.0 < s <= OUTER_RADIUS else 1.0

    def tangential_derivative(s: float) -> float:
        return 8.0 * (s - 1.0) / s ** 3 if 1.0 < s <= OUTER_RADIUS else 0.0

    return RadialSymTensorField(
        radial=radial,
        tangential=tangential,
        radial_derivative=lambda s: 0.0,
        tangential_derivative=tangential_derivative,
        singular_support=UNIT_SPHERE_SUPPORT,
        interface_radii=(OUTER_RADIUS,),
        name="cloak-metric",
    )


# ============================================================================
# Wormhole
# ============================================================================

@dataclass(frozen=True)
class WarpProfile:
    """Sphere radius r(z) along the handle, z in [0, 1]."""

    radius: RadialRule
    derivative: RadialRule
    name: str = "product"


def product_warp(radius: float = 1.0) -> WarpProfile:
    if not radius > 0.0:
        raise ParameterError(f"Warp radius must be positive, got {radius}")
    return WarpProfile(radius=lambda z: radius, derivative=lambda z: 0.0, name=f"product(r={radius:g})")


def collimator_warp(r_min: float = 0.2) -> WarpProfile:
    """r(z) = 1 - (1 - r_min) sin^2(pi z): unit radius at both mouths, r_min at the middle."""
    if not 0.0 < r_min <= 1.0:
        raise ParameterError(f"Collimator waist must lie in (0, 1], got {r_min}")
    depth = 1.0 - r_min
    return WarpProfile(
        radius=lambda z: 1.0 - depth * math.sin(math.pi * z) ** 2,
        derivative=lambda z: -depth * math.pi * math.sin(2.0 * math.pi * z),
        name=f"collimator(r_min={r_min:g})",
    )


def handle_metric_field(warp: WarpProfile, handle_length: float = 1.0) -> RadialSymTensorField:
    """
    Warped-product metric dz'^2 + r(z)^2 dOmega^2 on the handle chart.

    The chart places S^2 x [0, handle_length] at radii s = 1 + z' so the
    metric has radial eigenvalue 1 and tangential eigenvalue r(z)^2 / s^2.
    """
    def tangential(s: float) -> float:
        z = (s - 1.0) / handle_length
        return (warp.radius(z) / s) ** 2

    def tangential_derivative(s: float) -> float:
        z = (s - 1.0) / handle_length
        r = warp.radius(z)
        return 2.0 * r * warp.derivative(z) / (handle_length * s * s) - 2.0 * r * r / s ** 3

    return RadialSymTensorField(
        radial=lambda s: 1.0,
        tangential=tangential,
        radial_derivative=lambda s: 0.0,
        tangential_derivative=tangential_derivative,
        name=f"handle[{warp.name}]",
    )


def wormhole_geometry(separation: float = 4.0, warp: Optional[WarpProfile] = None,
                      handle_length: float = 1.0) -> StoDesign:
    """
    Wormhole design: M1 = R^3 minus unit balls at O and P = (0, 0, L), M2 = S^2 x [0, 1].

    The mouth around O is glued to the z = 0 end of the handle and the mouth
    around P to the z = 1 end, with the normal mirrored in z so an axial ray
    entering O from below leaves P upward.

    Args:
        separation: Distance L between the ball centres (L > 3)
        warp: Handle sphere radius profile (product metric when None)
        handle_length: Length of the handle

    Raises:
        ParameterError: L <= 3 or non-positive handle length
    """
    if not separation > 3.0:
        raise ParameterError(f"Ball separation must exceed 3, got {separation}")
    if not handle_length > 0.0:
        raise ParameterError(f"Handle length must be positive, got {handle_length}")
    warp = warp or product_warp()
    origin = (0.0, 0.0, 0.0)
    far = (0.0, 0.0, float(separation))

    pieces = (
        ManifoldPiece("M1", f"R^3 minus B(O,1) and B(P,1), P=(0,0,{separation:g})", euclidean_metric()),
        ManifoldPiece("M2", "S^2 x [0,1]", handle_metric_field(warp, handle_length)),
    )
    outer = 1.0 + handle_length
    transitions = (
        ChartTransition(0, 1, origin, 1.0, origin, 1.0, reflect_z=False, flip_radial=True, label="mouth-O"),
        ChartTransition(1, 0, origin, outer, far, 1.0, reflect_z=True, flip_radial=False, label="mouth-P"),
    )
    return StoDesign(
        pieces=pieces,
        transitions=transitions,
        parameters={"separation": float(separation), "warp": warp, "handle_length": handle_length},
        name="wormhole",
    )
