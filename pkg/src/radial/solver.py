"""
Spherical-harmonic separation solver for radially layered media.

For each harmonic degree l the piecewise radial equation is solved by
combining per-interval bases through a global linear system:

- regular interface: u / t and t A u' continuous (2 equations)
- cloaking-surface interface: hidden Neumann condition A u' = 0 on the
  inner side (1 equation; the shell keeps only its finite-energy branch)
- outer boundary: u(2) / t = f

The system is row/column equilibrated; a condition number above 1e12
is reported as a resonance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import special

from ..designs import OUTER_RADIUS, RadialMediumProfile
from ..errors import ParameterError, ResonanceError
from .bases import DEFAULT_RTOL, IntervalBasis, ParticularSolution, make_basis

logger = logging.getLogger(__name__)

RESONANCE_THRESHOLD = 1e12
DEFAULT_L_MAX = 8
QUADRATURE_NODES = 64

SourceRule = Callable[[float], float]


def _resolve_frequency(omega: float, energy: Optional[float]) -> Tuple[float, float]:
    """Return (label frequency, omega^2); an energy E stands for omega^2 = E."""
    if energy is not None:
        return float(energy), float(energy)
    if not math.isfinite(omega):
        raise ParameterError(f"Frequency must be finite, got {omega}")
    return float(omega), float(omega) * float(omega)


@dataclass
class RadialSolution:
    """
    Solution of one separated radial problem.

    `evaluate` returns the interval's own field variable: u for acoustic
    profiles, psi = gamma^{1/2} u for Schrodinger profiles.
    """

    profile: RadialMediumProfile
    degree: int
    frequency: float
    omega_squared: float
    boundary_value: float
    bases: List[IntervalBasis]
    coefficients: List[np.ndarray]
    particulars: List[Optional[ParticularSolution]]
    condition: float
    source: Optional[SourceRule] = None

    def _index(self, r: float, side: int) -> int:
        return self.profile.interval_index(r, side)

    def state(self, r: float, side: int = -1) -> Tuple[float, float, float]:
        """(u, u', q) at r, with q = A u' the flux; side picks the interval at an interface."""
        i = self._index(r, side)
        u_b, du_b, q_b = self.bases[i].evaluate(r)
        c = self.coefficients[i]
        u, du, q = float(c @ u_b), float(c @ du_b), float(c @ q_b)
        if self.particulars[i] is not None:
            pu, pdu, pq = self.particulars[i].evaluate(r)
            u, du, q = u + pu, du + pdu, q + pq
        return u, du, q

    def evaluate(self, r: float, side: int = -1) -> Tuple[float, float]:
        u, du, _ = self.state(r, side)
        return u, du

    def flux(self, r: float, side: int = -1) -> float:
        """Weighted flux t A u' (continuous across regular interfaces)."""
        _, _, q = self.state(r, side)
        return self.profile.weight(r, side) * q

    def dn_value(self) -> float:
        """lambda_l = t^2 a(2) u'(2) / u(2), the flux per unit area for unit Dirichlet data."""
        u, _, q = self.state(OUTER_RADIUS)
        t = self.profile.weight(OUTER_RADIUS)
        return t * t * q / (OUTER_RADIUS * OUTER_RADIUS * u)

    def transmission_residuals(self) -> pd.DataFrame:
        """Jumps of u/t and t q at every interface (hidden Neumann residual at cloaking surfaces)."""
        rows = []
        for i, rho in enumerate(self.profile.interface_radii):
            inner, outer = self.profile.intervals[i], self.profile.intervals[i + 1]
            u_in, _, q_in = self.state(rho, -1)
            u_out, _, q_out = self.state(rho, +1)
            if outer.degenerate_inner:
                rows.append({"radius": rho, "value_jump": float("nan"),
                             "flux_jump": abs(inner.weight * q_in), "degenerate": True})
                continue
            value_scale = max(1.0, abs(u_in / inner.weight))
            flux_scale = max(1.0, abs(inner.weight * q_in))
            rows.append({
                "radius": rho,
                "value_jump": abs(u_in / inner.weight - u_out / outer.weight) / value_scale,
                "flux_jump": abs(inner.weight * q_in - outer.weight * q_out) / flux_scale,
                "degenerate": False,
            })
        return pd.DataFrame(rows, columns=["radius", "value_jump", "flux_jump", "degenerate"])

    def ode_residual(self, r: float, step: float = 1e-5) -> float:
        """
        Relative residual of (A u')' + [r^2 (omega^2 w - V) - b L] u - r^2 w p at an interior point.

        (A u')' is taken by central differences of the flux.
        """
        i = self._index(r, -1)
        interval = self.profile.intervals[i]
        h = min(step, 0.25 * (r - interval.r_inner), 0.25 * (interval.r_outer - r))
        _, _, q_plus = self.state(r + h, -1)
        _, _, q_minus = self.state(r - h, -1)
        u, _, _ = self.state(r, -1)
        dq = (q_plus - q_minus) / (2.0 * h)
        c = interval.coefficients(r)
        L = self.degree * (self.degree + 1)
        potential_term = (r * r * (self.omega_squared * c.bulk - c.potential) - c.tangential * L) * u
        source_term = r * r * c.bulk * self.source(r) if self.source is not None else 0.0
        scale = max(abs(dq), abs(potential_term), abs(source_term), 1e-300)
        return abs(dq + potential_term - source_term) / scale

    def _quadrature(self, integrand: Callable[[float], float], r_min: float, r_max: float,
                    nodes: int = QUADRATURE_NODES) -> float:
        x, wts = np.polynomial.legendre.leggauss(nodes)
        total = 0.0
        edges = [0.0] + self.profile.interface_radii + [OUTER_RADIUS]
        for lo, hi in zip(edges, edges[1:]):
            lo, hi = max(lo, r_min), min(hi, r_max)
            if hi <= lo:
                continue
            mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            total += half * sum(w * integrand(mid + half * xi) for xi, w in zip(x, wts))
        return total

    def quadratic_form(self, nodes: int = QUADRATURE_NODES) -> float:
        """
        Energy Q = integral of A u'^2 + b L u^2 + r^2 (V - omega^2 w) u^2 over (0, 2).

        Without a source Q equals the boundary pairing u(2) q(2) = 4 lambda_l f^2.
        """
        L = self.degree * (self.degree + 1)

        def integrand(r: float) -> float:
            u, du, q = self.state(r)
            c = self.profile.coefficients(r)
            return q * du + (c.tangential * L + r * r * (c.potential - self.omega_squared * c.bulk)) * u * u

        return self._quadrature(integrand, 0.0, OUTER_RADIUS, nodes)

    def gradient_energy(self, nodes: int = QUADRATURE_NODES) -> float:
        """Integral of A u'^2 + b L u^2 (the sigma grad u . grad u energy per harmonic)."""
        L = self.degree * (self.degree + 1)

        def integrand(r: float) -> float:
            u, du, q = self.state(r)
            return q * du + self.profile.tangential(r) * L * u * u

        return self._quadrature(integrand, 0.0, OUTER_RADIUS, nodes)

    def boundary_pairing(self) -> float:
        u, _, q = self.state(OUTER_RADIUS)
        return u * q

    def l2_norm_squared(self, r_min: float = 0.0, r_max: float = OUTER_RADIUS,
                        nodes: int = QUADRATURE_NODES) -> float:
        """Integral of u^2 r^2 over (r_min, r_max)."""
        return self._quadrature(lambda r: self.state(r)[0] ** 2 * r * r, r_min, r_max, nodes)


def radial_solve(
    profile: RadialMediumProfile,
    degree: int,
    omega: float = 0.0,
    source: Optional[SourceRule] = None,
    boundary: float = 1.0,
    method: str = "auto",
    energy: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
) -> RadialSolution:
    """
    Solve the separated radial problem for one harmonic degree.

    Args:
        profile: Radial medium
        degree: Harmonic degree l >= 0
        omega: Frequency (ignored when energy is given)
        source: Radial source component p_l(r), or None
        boundary: Dirichlet value f at r = 2
        method: "auto" (closed forms on constant and chart intervals) or "ode"
        energy: Schrodinger energy E, used as omega^2
        rtol: Relative tolerance of integrated intervals

    Returns:
        RadialSolution

    Raises:
        ResonanceError: interface system condition number above 1e12
        NumericalError: integrator failure
    """
    if degree < 0:
        raise ParameterError(f"Harmonic degree must be non-negative, got {degree}")
    frequency, omega2 = _resolve_frequency(omega, energy)
    intervals = profile.intervals
    bases = [make_basis(iv, degree, omega2, first=(i == 0), method=method, rtol=rtol)
             for i, iv in enumerate(intervals)]
    particulars: List[Optional[ParticularSolution]] = [
        ParticularSolution(iv, degree, omega2, source, first=(i == 0), rtol=rtol) if source is not None else None
        for i, iv in enumerate(intervals)
    ]
    offsets = np.cumsum([0] + [b.size for b in bases])
    n_unknowns = int(offsets[-1])

    def particular_at(i: int, r: float) -> Tuple[float, float]:
        if particulars[i] is None:
            return 0.0, 0.0
        pu, _, pq = particulars[i].evaluate(r)
        return pu, pq

    rows: List[np.ndarray] = []
    rhs: List[float] = []
    for i, rho in enumerate(profile.interface_radii):
        inner, outer = intervals[i], intervals[i + 1]
        t_in, t_out = inner.weight, outer.weight
        u_in, _, q_in = bases[i].evaluate(rho)
        pu_in, pq_in = particular_at(i, rho)
        if outer.degenerate_inner:
            row = np.zeros(n_unknowns)
            row[offsets[i]:offsets[i + 1]] = t_in * q_in
            rows.append(row)
            rhs.append(-t_in * pq_in)
            continue
        u_out, _, q_out = bases[i + 1].evaluate(rho)
        pu_out, pq_out = particular_at(i + 1, rho)
        value_row = np.zeros(n_unknowns)
        value_row[offsets[i]:offsets[i + 1]] = u_in / t_in
        value_row[offsets[i + 1]:offsets[i + 2]] = -u_out / t_out
        flux_row = np.zeros(n_unknowns)
        flux_row[offsets[i]:offsets[i + 1]] = t_in * q_in
        flux_row[offsets[i + 1]:offsets[i + 2]] = -t_out * q_out
        rows.extend([value_row, flux_row])
        rhs.extend([pu_out / t_out - pu_in / t_in, t_out * pq_out - t_in * pq_in])

    last = len(intervals) - 1
    u_end, _, _ = bases[last].evaluate(OUTER_RADIUS)
    pu_end, _ = particular_at(last, OUTER_RADIUS)
    boundary_row = np.zeros(n_unknowns)
    boundary_row[offsets[last]:] = u_end / intervals[last].weight
    rows.append(boundary_row)
    rhs.append(boundary - pu_end / intervals[last].weight)

    matrix = np.array(rows)
    vector = np.array(rhs)
    row_scale = 1.0 / np.maximum(np.abs(matrix).max(axis=1), 1e-300)
    scaled = matrix * row_scale[:, None]
    col_scale = 1.0 / np.maximum(np.abs(scaled).max(axis=0), 1e-300)
    scaled = scaled * col_scale[None, :]
    condition = float(np.linalg.cond(scaled))
    logger.debug(
        f"l={degree} omega^2={omega2:.6g}: {n_unknowns} unknowns, "
        f"bases {[b.kind for b in bases]}, condition {condition:.3e}"
    )
    if not math.isfinite(condition) or condition > RESONANCE_THRESHOLD:
        raise ResonanceError(frequency, degree, condition)
    z = np.linalg.solve(scaled, vector * row_scale)
    solution_vector = z * col_scale
    coefficients = [solution_vector[offsets[i]:offsets[i + 1]] for i in range(len(intervals))]

    return RadialSolution(
        profile=profile,
        degree=degree,
        frequency=frequency,
        omega_squared=omega2,
        boundary_value=boundary,
        bases=bases,
        coefficients=coefficients,
        particulars=particulars,
        condition=condition,
        source=source,
    )


@dataclass
class DNSpectrum:
    """Dirichlet-to-Neumann eigenvalues lambda_l, l = 0..L_max, at one frequency."""

    frequency: float
    degrees: Tuple[int, ...]
    values: Tuple[float, ...]
    profile_name: str = ""
    quantity: str = "omega"

    def value(self, degree: int) -> float:
        return self.values[self.degrees.index(degree)]

    def errors_against(self, other: "DNSpectrum") -> np.ndarray:
        """Per-degree |lambda_l - other lambda_l| over the shared degrees."""
        shared = [l for l in self.degrees if l in other.degrees]
        return np.array([abs(self.value(l) - other.value(l)) for l in shared])

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"l": list(self.degrees), "lambda": list(self.values)})

    def to_records(self) -> Dict:
        return {
            "profile": self.profile_name,
            "quantity": self.quantity,
            "frequency": self.frequency,
            "spectrum": [{"l": l, "lambda": v} for l, v in zip(self.degrees, self.values)],
        }


def dn_spectrum(
    profile: RadialMediumProfile,
    omega: float = 0.0,
    l_max: int = DEFAULT_L_MAX,
    method: str = "auto",
    energy: Optional[float] = None,
    rtol: float = DEFAULT_RTOL,
) -> DNSpectrum:
    """
    DN spectrum of a radial profile.

    Raises:
        ResonanceError: naming the first offending degree
    """
    if l_max < 0:
        raise ParameterError(f"L_max must be non-negative, got {l_max}")
    frequency, _ = _resolve_frequency(omega, energy)
    values = []
    for degree in range(l_max + 1):
        solution = radial_solve(profile, degree, omega=omega, method=method, energy=energy, rtol=rtol)
        values.append(solution.dn_value())
    return DNSpectrum(
        frequency=frequency,
        degrees=tuple(range(l_max + 1)),
        values=tuple(values),
        profile_name=profile.name,
        quantity="energy" if energy is not None else "omega",
    )


def free_dn_value(degree: int, omega_squared: float) -> float:
    """
    Closed-form DN eigenvalue of the homogeneous unit ball of radius 2.

    omega j_l'(2 omega) / j_l(2 omega) for omega^2 > 0, l / 2 at zero
    frequency, the modified-Bessel analogue for omega^2 < 0.

    Raises:
        ResonanceError: omega^2 is a Dirichlet eigenvalue of the ball
    """
    if omega_squared == 0.0:
        return degree / 2.0
    k = math.sqrt(abs(omega_squared))
    x = OUTER_RADIUS * k
    if omega_squared > 0.0:
        f = special.spherical_jn(degree, x)
        df = special.spherical_jn(degree, x, derivative=True)
    else:
        f = special.spherical_in(degree, x)
        df = special.spherical_in(degree, x, derivative=True)
    if abs(f) < 1e-12 * max(abs(df), 1.0):
        raise ResonanceError(math.sqrt(omega_squared) if omega_squared > 0 else omega_squared, degree)
    return float(k * df / f)


def free_dn_spectrum(omega: float = 0.0, l_max: int = DEFAULT_L_MAX, energy: Optional[float] = None) -> DNSpectrum:
    frequency, omega2 = _resolve_frequency(omega, energy)
    degrees = tuple(range(l_max + 1))
    return DNSpectrum(
        frequency=frequency,
        degrees=degrees,
        values=tuple(free_dn_value(l, omega2) for l in degrees),
        profile_name="free",
        quantity="energy" if energy is not None else "omega",
    )
