"""
Per-interval solution bases for the separated radial equation

    (A u')' + [r^2 (omega^2 w - V) - b l(l+1)] u = r^2 w p,    A = r^2 a.

Every basis evaluates its functions at r as (u, u', q) with q = A u' the
radial flux. The first interval (touching r = 0) and intervals whose inner
end is a cloaking surface carry only the regular / finite-energy branch;
all others carry two independent solutions.
"""

import logging
import math
from abc import ABC, abstractmethod
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import special
from scipy.integrate import solve_ivp

from ..designs import ConstantMedium, RadialInterval
from ..errors import NumericalError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-10
# Absolute integration tolerance as a fraction of the relative one
ATOL_RATIO = 1e-2
# Frobenius start offset from r = 0 or from a degenerate inner end
SERIES_START = 1e-4
# |W| / (|s1| |s2|) below this means the two integrated solutions are dependent
WRONSKIAN_FLOOR = 1e-10

Triple = Tuple[np.ndarray, np.ndarray, np.ndarray]


def angular_order(ratio: float, degree: int) -> float:
    """Order nu >= 0 with nu (nu + 1) = ratio * l (l + 1)."""
    return 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * ratio * degree * (degree + 1)))


def _is_integer(nu: float) -> bool:
    return abs(nu - round(nu)) < 1e-12


def spherical_function(kind: str, nu: float, x: float) -> Tuple[float, float]:
    """
    Spherical Bessel-type function of real order and its derivative.

    Args:
        kind: "j", "y" (oscillatory) or "i", "k" (modified)
        nu: Order (>= 0)
        x: Argument (> 0, or 0 for the regular kinds)

    Returns:
        (value, derivative with respect to x)
    """
    if _is_integer(nu):
        n = int(round(nu))
        fn = {"j": special.spherical_jn, "y": special.spherical_yn,
              "i": special.spherical_in, "k": special.spherical_kn}[kind]
        return float(fn(n, x)), float(fn(n, x, derivative=True))
    if x == 0.0:
        return 0.0, 0.0
    order = nu + 0.5
    prefactor = math.sqrt(math.pi / (2.0 * x))
    if kind == "j":
        f, df = special.jv(order, x), special.jvp(order, x)
    elif kind == "y":
        f, df = special.yv(order, x), special.yvp(order, x)
    elif kind == "i":
        f, df = special.iv(order, x), special.ivp(order, x)
    else:
        f, df = special.kv(order, x), special.kvp(order, x)
    return float(prefactor * f), float(prefactor * (df - f / (2.0 * x)))


class IntervalBasis(ABC):
    """Solutions of the homogeneous equation on one interval."""

    def __init__(self, interval: RadialInterval, degree: int, omega_squared: float):
        self.interval = interval
        self.degree = degree
        self.omega_squared = omega_squared

    @property
    @abstractmethod
    def size(self) -> int:
        """Number of basis functions (1 or 2)."""

    @abstractmethod
    def evaluate(self, r: float) -> Triple:
        """Arrays (u, du, q) of length `size` at radius r."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class ConstantBasis(IntervalBasis):
    """
    Closed-form solutions on a constant medium, in the coordinate rho.

    With k^2 = (omega^2 w - V) / a and nu (nu + 1) = (b / a) l (l + 1):
    spherical Bessel j/y for k^2 > 0, modified i/k for k^2 < 0, and
    rho^nu, rho^{-nu-1} for k^2 = 0. The regular function is scaled to unit
    size at rho_outer and the singular one at rho_inner, size = hypot(f, rho f').
    """

    def __init__(self, medium: ConstantMedium, degree: int, omega_squared: float,
                 rho_inner: float, rho_outer: float, regular_only: bool,
                 interval: Optional[RadialInterval] = None):
        super().__init__(interval, degree, omega_squared)
        self.medium = medium
        self.rho_inner = rho_inner
        self.rho_outer = rho_outer
        self.regular_only = regular_only
        self.k_squared = (omega_squared * medium.bulk - medium.potential) / medium.radial
        self.nu = angular_order(medium.tangential / medium.radial, degree)
        self.kinds = ["regular"] if regular_only else ["regular", "singular"]
        self.scales = [1.0] * len(self.kinds)
        self.scales[0] = 1.0 / self._size(0, rho_outer)
        if not regular_only:
            self.scales[1] = 1.0 / self._size(1, rho_inner)

    @property
    def size(self) -> int:
        return len(self.kinds)

    def _raw(self, index: int, rho: float) -> Tuple[float, float]:
        nu, k2 = self.nu, self.k_squared
        if k2 == 0.0:
            if index == 0:
                if rho == 0.0:
                    return (1.0 if nu == 0.0 else 0.0), (1.0 if nu == 1.0 else 0.0)
                return rho ** nu, nu * rho ** (nu - 1.0)
            return rho ** (-nu - 1.0), (-nu - 1.0) * rho ** (-nu - 2.0)
        k = math.sqrt(abs(k2))
        kinds = ("j", "y") if k2 > 0.0 else ("i", "k")
        f, df = spherical_function(kinds[index], nu, k * rho)
        return f, k * df

    def _size(self, index: int, rho: float) -> float:
        f, df = self._raw(index, rho)
        size = math.hypot(f, rho * df)
        if not (size > 0.0 and math.isfinite(size)):
            raise NumericalError(f"Cannot normalise {self.kinds[index]} solution at rho={rho:.6g} (nu={self.nu:.6g})")
        return size

    def evaluate_base(self, rho: float) -> Tuple[np.ndarray, np.ndarray]:
        values = np.empty(self.size)
        derivs = np.empty(self.size)
        for index in range(self.size):
            f, df = self._raw(index, rho)
            values[index] = self.scales[index] * f
            derivs[index] = self.scales[index] * df
        return values, derivs

    def evaluate(self, r: float) -> Triple:
        u, du = self.evaluate_base(r)
        return u, du, self.medium.radial * r * r * du


class ChartBasis(IntervalBasis):
    """Closed-form solutions on a chart interval: u(r) = v(y(r)) with v from ConstantBasis."""

    def __init__(self, interval: RadialInterval, degree: int, omega_squared: float, regular_only: bool):
        super().__init__(interval, degree, omega_squared)
        chart = interval.chart
        self.chart = chart
        y_in = chart.position(interval.r_inner)
        y_out = chart.position(interval.r_outer)
        self.base = ConstantBasis(chart.base, degree, omega_squared, y_in, y_out,
                                  regular_only=regular_only or y_in == 0.0, interval=interval)

    @property
    def size(self) -> int:
        return self.base.size

    def evaluate(self, r: float) -> Triple:
        y = self.chart.position(r)
        dy = self.chart.derivative(r)
        f, df = self.base.evaluate_base(y)
        return f, df * dy, self.chart.base.radial * y * y * df


def _ode_rhs(interval: RadialInterval, degree: int, omega_squared: float,
             source: Optional[Callable[[float], float]]):
    L = degree * (degree + 1)

    def rhs(r, state):
        c = interval.coefficients(r)
        A = interval.flux_coefficient(r)
        u, q = state
        dq = -(r * r * (omega_squared * c.bulk - c.potential) - c.tangential * L) * u
        if source is not None:
            dq += r * r * c.bulk * source(r)
        return [q / A, dq]

    return rhs


def integrate_interval(interval: RadialInterval, degree: int, omega_squared: float,
                       start: float, stop: float, state0: Tuple[float, float],
                       source: Optional[Callable[[float], float]] = None,
                       rtol: float = DEFAULT_RTOL):
    """
    Adaptive RK45 integration of (u, q) from `start` to `stop` with dense output.

    Raises:
        NumericalError: integrator failure
    """
    sol = solve_ivp(
        _ode_rhs(interval, degree, omega_squared, source),
        (start, stop),
        list(state0),
        method="RK45",
        rtol=rtol,
        atol=rtol * ATOL_RATIO,
        dense_output=True,
    )
    if not sol.success:
        raise NumericalError(
            f"Radial integration failed on ({interval.r_inner:.6g}, {interval.r_outer:.6g}] "
            f"l={degree}: {sol.message}"
        )
    return sol.sol


class _Branch:
    """One integrated solution with a power-series continuation near its start point."""

    def __init__(self, dense, lo: float, hi: float, series: Optional[Tuple[float, float, float, float]] = None):
        self.dense = dense
        self.lo = lo
        self.hi = hi
        # (origin, start, exponent, c): u = ((r - origin)/(start - origin))^s (1 + c x^2)/(1 + c x0^2)
        self.series = series
        self.scale = 1.0

    def state(self, r: float, interval: RadialInterval) -> Tuple[float, float]:
        if self.series is not None and r < self.series[1]:
            origin, start, s, c = self.series
            x, x0 = r - origin, start - origin
            if x <= 0.0:
                u = 1.0 / (1.0 + c * x0 * x0) if s == 0.0 else 0.0
                return self.scale * u, 0.0
            u = (x / x0) ** s * (1.0 + c * x * x) / (1.0 + c * x0 * x0)
            du = u * (s / x + 2.0 * c * x / (1.0 + c * x * x))
            return self.scale * u, self.scale * interval.flux_coefficient(r) * du
        u, q = self.dense(min(max(r, self.lo), self.hi))
        return self.scale * float(u), self.scale * float(q)


class OdeBasis(IntervalBasis):
    """
    Numerically integrated solutions.

    First interval: Frobenius start r^nu (1 + c r^2) at r = 1e-4.
    Degenerate inner end: start (r - r_inner)^s at offset 1e-4 with
    s (s + 1) A2 = b l (l + 1), A ~ A2 (r - r_inner)^2.
    Otherwise two solutions, integrated left to right from (u, q) = (1, 0)
    and right to left from (0, 1), then checked for independence.
    """

    def __init__(self, interval: RadialInterval, degree: int, omega_squared: float,
                 first: bool, rtol: float = DEFAULT_RTOL):
        super().__init__(interval, degree, omega_squared)
        self.rtol = rtol
        r_in, r_out = interval.r_inner, interval.r_outer
        self.branches: List[_Branch] = []
        if first or interval.degenerate_inner:
            self.branches.append(self._series_branch(first))
        else:
            left = integrate_interval(interval, degree, omega_squared, r_in, r_out, (1.0, 0.0), rtol=rtol)
            right = integrate_interval(interval, degree, omega_squared, r_out, r_in, (0.0, 1.0), rtol=rtol)
            self.branches = [_Branch(left, r_in, r_out), _Branch(right, r_in, r_out)]
        self._normalise()
        if len(self.branches) == 2:
            self._check_independent()

    def _series_branch(self, first: bool) -> _Branch:
        interval = self.interval
        r_in, r_out = interval.r_inner, interval.r_outer
        L = self.degree * (self.degree + 1)
        offset = min(SERIES_START, 1e-2 * (r_out - r_in))
        start = r_in + offset
        c = interval.coefficients(start)
        A = interval.flux_coefficient(start)
        if first:
            nu = angular_order(c.tangential / c.radial, self.degree)
            k2 = (self.omega_squared * c.bulk - c.potential) / c.radial
            coef = -k2 / (2.0 * (2.0 * nu + 3.0))
        else:
            A2 = A / (offset * offset)
            nu = angular_order(c.tangential / A2, self.degree) if L else 0.0
            coef = 0.0
        du = nu / offset + 2.0 * coef * offset / (1.0 + coef * offset * offset)
        dense = integrate_interval(interval, self.degree, self.omega_squared, start, r_out, (1.0, A * du),
                                   rtol=self.rtol)
        logger.debug(f"Series start at r={start:.3g} (exponent {nu:.6g}) on ({r_in:.6g}, {r_out:.6g}]")
        return _Branch(dense, start, r_out, series=(r_in, start, nu, coef))

    def _normalise(self):
        ends = [self.interval.r_outer, self.interval.r_inner]
        for branch, r in zip(self.branches, ends):
            if branch.series is not None:
                r = self.interval.r_outer
            u, q = branch.state(r, self.interval)
            A = self.interval.flux_coefficient(r)
            du = q / A if A > 0.0 else 0.0
            size = math.hypot(u, r * du) if A > 0.0 else abs(u)
            if not (size > 0.0 and math.isfinite(size)):
                raise NumericalError(f"Integrated solution vanishes at r={r:.6g}")
            branch.scale = 1.0 / size

    def _check_independent(self):
        r = 0.5 * (self.interval.r_inner + self.interval.r_outer)
        u1, q1 = self.branches[0].state(r, self.interval)
        u2, q2 = self.branches[1].state(r, self.interval)
        wronskian = u1 * q2 - q1 * u2
        if abs(wronskian) <= WRONSKIAN_FLOOR * math.hypot(u1, q1) * math.hypot(u2, q2):
            raise NumericalError(f"Dependent solutions on ({self.interval.r_inner:.6g}, {self.interval.r_outer:.6g}]")

    @property
    def size(self) -> int:
        return len(self.branches)

    def evaluate(self, r: float) -> Triple:
        u = np.empty(self.size)
        q = np.empty(self.size)
        for i, branch in enumerate(self.branches):
            u[i], q[i] = branch.state(r, self.interval)
        A = self.interval.flux_coefficient(r)
        du = q / A if A > 0.0 else np.zeros(self.size)
        return u, du, q


def make_basis(interval: RadialInterval, degree: int, omega_squared: float, first: bool,
               method: str = "auto", rtol: float = DEFAULT_RTOL) -> IntervalBasis:
    """
    Choose the basis for an interval.

    Args:
        interval: Interval of a profile
        degree: Harmonic degree l
        omega_squared: omega^2 (or the energy E for Schrodinger profiles)
        first: Whether the interval touches r = 0
        method: "auto" (closed forms where available) or "ode" (integrate everything)
        rtol: Relative tolerance for integrated intervals
    """
    if method not in ("auto", "ode"):
        raise ParameterError(f"Unknown solve method: {method}")
    if method == "auto":
        if interval.is_constant_at(omega_squared):
            return ConstantBasis(interval.medium, degree, omega_squared, interval.r_inner, interval.r_outer,
                                 regular_only=first, interval=interval)
        if interval.chart is not None:
            return ChartBasis(interval, degree, omega_squared, regular_only=first)
    return OdeBasis(interval, degree, omega_squared, first=first, rtol=rtol)


class ParticularSolution:
    """Zero-data particular solution of the sourced equation on one interval."""

    def __init__(self, interval: RadialInterval, degree: int, omega_squared: float,
                 source: Callable[[float], float], first: bool, rtol: float = DEFAULT_RTOL):
        self.interval = interval
        start = interval.r_inner
        if first or interval.degenerate_inner:
            start += min(SERIES_START, 1e-2 * (interval.r_outer - interval.r_inner))
        self.start = start
        self.dense = integrate_interval(interval, degree, omega_squared, start, interval.r_outer, (0.0, 0.0),
                                        source=source, rtol=rtol)

    def evaluate(self, r: float) -> Tuple[float, float, float]:
        if r <= self.start:
            return 0.0, 0.0, 0.0
        u, q = self.dense(min(r, self.interval.r_outer))
        A = self.interval.flux_coefficient(r)
        return float(u), float(q / A) if A > 0.0 else 0.0, float(q)
