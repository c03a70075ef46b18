"""
Geometry core for the cloaking toolkit.

Points, symmetric 3x3 tensors, tensor/scalar fields and the
metric <-> conductivity correspondence sigma^{ij} = |g|^{1/2} g^{ij}.

Tensors are stored in Cartesian components. Spherical components are
only offered as conversion views because the spherical chart is singular
on the z-axis.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, SingularSetError

# Smallest eigenvalue must exceed this fraction of the largest one
SPD_RELATIVE_FLOOR = 1e-14
# Evaluations closer than this to a declared singular set are refused
SINGULAR_CUTOFF = 1e-12
# Richardson-extrapolated central differences for fields without analytic gradients
FD_STEP = 1e-6


class Point3(NamedTuple):
    """Point of R^3 (the canonical domain is the ball N = B(0, 2))."""

    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Point3":
        x, y, z = (float(v) for v in values)
        if not all(math.isfinite(c) for c in (x, y, z)):
            raise DomainError(f"Point has non-finite components: {(x, y, z)}")
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


PointLike = Union[Point3, Sequence[float], np.ndarray]


def as_point_array(point: PointLike) -> np.ndarray:
    """Return a finite float array of shape (3,) for any point-like value."""
    arr = np.asarray(point, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"Point has non-finite components: {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class SymTensor3:
    """
    Symmetric 3x3 tensor stored by its six independent Cartesian components.

    Symmetry is exact by construction; every tensor of the toolkit
    (sigma^{ij}, g_{ij}, g^{ij}, eps^{jk}, mu^{jk}) is one of these.
    """

    xx: float
    xy: float
    xz: float
    yy: float
    yz: float
    zz: float

    @classmethod
    def from_matrix(cls, matrix: Union[np.ndarray, Sequence[Sequence[float]]]) -> "SymTensor3":
        """
        Build a tensor from a 3x3 matrix, symmetrizing it.

        Args:
            matrix: 3x3 array-like

        Returns:
            SymTensor3 holding (M + M^T) / 2
        """
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise DomainError(f"Expected a 3x3 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError("Tensor has non-finite components")
        s = 0.5 * (m + m.T)
        return cls(s[0, 0], s[0, 1], s[0, 2], s[1, 1], s[1, 2], s[2, 2])

    @classmethod
    def identity(cls, scale: float = 1.0) -> "SymTensor3":
        return cls(scale, 0.0, 0.0, scale, 0.0, scale)

    @classmethod
    def diagonal(cls, a: float, b: float, c: float) -> "SymTensor3":
        return cls(a, 0.0, 0.0, b, 0.0, c)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ])

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order (real by symmetry)."""
        return np.linalg.eigvalsh(self.matrix)

    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self) -> "SymTensor3":
        require_spd(self)
        return SymTensor3.from_matrix(np.linalg.inv(self.matrix))

    def scaled(self, factor: float) -> "SymTensor3":
        return SymTensor3.from_matrix(factor * self.matrix)

    def is_positive_definite(self) -> bool:
        ev = self.eigenvalues()
        return bool(ev[-1] > 0.0 and ev[0] > SPD_RELATIVE_FLOOR * ev[-1])

    def allclose(self, other: "SymTensor3", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, rtol=rtol, atol=atol))


def require_spd(tensor: SymTensor3) -> np.ndarray:
    """
    Check positive definiteness and return the eigenvalues.

    Raises:
        DomainError: smallest eigenvalue below 1e-14 times the largest
    """
    ev = tensor.eigenvalues()
    if not (ev[-1] > 0.0 and ev[0] > SPD_RELATIVE_FLOOR * ev[-1]):
        raise DomainError(f"Tensor is not positive definite (eigenvalues {ev.tolist()})")
    return ev


# ============================================================================
# Metric <-> conductivity correspondence
# ============================================================================

def volume_density(g: SymTensor3) -> float:
    """
    Riemannian volume density |det g_{jk}|^{1/2}.

    In three dimensions this equals det(sigma) for sigma = metric_to_conductivity(g),
    so |g| = (det sigma)^2.
    """
    require_spd(g)
    return math.sqrt(abs(g.determinant()))


def metric_to_conductivity(g: SymTensor3) -> SymTensor3:
    """
    Conductivity of a metric: sigma^{ij} = |g|^{1/2} g^{ij}.

    Args:
        g: Covariant metric components g_{ij} (SPD)

    Returns:
        Conductivity tensor sigma^{ij}
    """
    require_spd(g)
    density = math.sqrt(abs(g.determinant()))
    return SymTensor3.from_matrix(density * np.linalg.inv(g.matrix))


def conductivity_to_metric(sigma: SymTensor3) -> SymTensor3:
    """
    Metric of a conductivity in dimension 3: g^{ij} = (det sigma)^{-1} sigma^{ij}.

    Args:
        sigma: Conductivity tensor (SPD)

    Returns:
        Covariant metric g_{ij} = det(sigma) * sigma^{-1}
    """
    require_spd(sigma)
    return SymTensor3.from_matrix(sigma.determinant() * np.linalg.inv(sigma.matrix))


# ============================================================================
# Spherical conversion views
# ============================================================================

def spherical_frame(point: PointLike) -> np.ndarray:
    """
    Orthonormal spherical frame at a point, rows (e_r, e_theta, e_phi).

    Raises:
        SingularSetError: at the origin or on the z-axis (chart singularity)
    """
    x = as_point_array(point)
    r = float(np.linalg.norm(x))
    rho = math.hypot(x[0], x[1])
    if r < SINGULAR_CUTOFF or rho < SINGULAR_CUTOFF * max(r, 1.0):
        raise SingularSetError(f"Spherical chart is singular at {x.tolist()}")
    cos_t, sin_t = x[2] / r, rho / r
    cos_p, sin_p = x[0] / rho, x[1] / rho
    return np.array([
        [sin_t * cos_p, sin_t * sin_p, cos_t],
        [cos_t * cos_p, cos_t * sin_p, -sin_t],
        [-sin_p, cos_p, 0.0],
    ])


def spherical_components(tensor: SymTensor3, point: PointLike, basis: str = "frame") -> np.ndarray:
    """
    View a Cartesian contravariant tensor in spherical components.

    Args:
        tensor: Cartesian components (e.g. a conductivity sigma^{ij})
        point: Evaluation point (off the z-axis)
        basis: "frame" for the orthonormal frame (e_r, e_theta, e_phi);
               "density" for coordinate-basis components of a tensor density,
               r^2 sin(theta) * D sigma D^T with D = d(r, theta, phi)/d(x, y, z)

    Returns:
        3x3 array in (r, theta, phi) ordering
    """
    frame = spherical_frame(point)
    m = tensor.matrix
    if basis == "frame":
        return frame @ m @ frame.T
    if basis == "density":
        x = as_point_array(point)
        r = float(np.linalg.norm(x))
        sin_t = math.hypot(x[0], x[1]) / r
        d = np.vstack([frame[0], frame[1] / r, frame[2] / (r * sin_t)])
        return r * r * sin_t * (d @ m @ d.T)
    raise DomainError(f"Unknown spherical basis: {basis}")


def radial_tensor_matrix(point: PointLike, radial: float, tangential: float) -> np.ndarray:
    """Cartesian matrix radial * e e^T + tangential * (I - e e^T) with e = x/|x|."""
    x = as_point_array(point)
    r = float(np.linalg.norm(x))
    if r < SINGULAR_CUTOFF:
        if not math.isclose(radial, tangential, rel_tol=1e-12, abs_tol=1e-300):
            raise SingularSetError("Anisotropic radial tensor is undefined at the origin")
        return tangential * np.eye(3)
    e = x / r
    proj = np.outer(e, e)
    return radial * proj + tangential * (np.eye(3) - proj)


# ============================================================================
# Fields
# ============================================================================

@dataclass(frozen=True)
class SingularSupport:
    """Declared singular set: isolated points and spheres (center, radius)."""

    points: Tuple[Tuple[float, float, float], ...] = ()
    spheres: Tuple[Tuple[Tuple[float, float, float], float], ...] = ()

    def distance(self, point: PointLike) -> float:
        x = as_point_array(point)
        best = math.inf
        for p in self.points:
            best = min(best, float(np.linalg.norm(x - np.asarray(p))))
        for center, radius in self.spheres:
            best = min(best, abs(float(np.linalg.norm(x - np.asarray(center))) - radius))
        return best

    def check(self, point: PointLike, cutoff: float = SINGULAR_CUTOFF) -> None:
        """Raise SingularSetError when the point lies within cutoff of the set."""
        if self.distance(point) < cutoff:
            raise SingularSetError(f"Evaluation at {as_point_array(point).tolist()} is on the singular set")


EMPTY_SUPPORT = SingularSupport()
ORIGIN_SUPPORT = SingularSupport(points=((0.0, 0.0, 0.0),))
UNIT_SPHERE_SUPPORT = SingularSupport(spheres=(((0.0, 0.0, 0.0), 1.0),))


@dataclass(frozen=True)
class ScalarField:
    """Evaluation rule Point3 -> real, finite off the singular support."""

    rule: Callable[[np.ndarray], float]
    singular_support: SingularSupport = EMPTY_SUPPORT
    name: str = "scalar"

    def __call__(self, point: PointLike) -> float:
        x = as_point_array(point)
        self.singular_support.check(x)
        value = float(self.rule(x))
        if not math.isfinite(value):
            raise DomainError(f"{self.name} is not finite at {x.tolist()}")
        return value

    @classmethod
    def constant(cls, value: float, name: str = "constant") -> "ScalarField":
        return cls(rule=lambda _x: value, name=name)


@dataclass(frozen=True)
class SymTensorField:
    """
    Evaluation rule Point3 -> SymTensor3, positive definite off the singular support.

    interface_radii lists spheres |x| = rho across which the field jumps
    (ray tracing refracts there).
    """

    rule: Callable[[np.ndarray], np.ndarray]
    singular_support: SingularSupport = EMPTY_SUPPORT
    interface_radii: Tuple[float, ...] = ()
    name: str = "tensor"

    def __call__(self, point: PointLike) -> SymTensor3:
        x = as_point_array(point)
        self.singular_support.check(x)
        return SymTensor3.from_matrix(self.rule(x))

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """Raw Cartesian matrix (no singular-set check); used by integrators."""
        return np.asarray(self.rule(x), dtype=float)

    def inverse_matrix(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.matrix(x))

    def inverse_gradient(self, x: np.ndarray) -> np.ndarray:
        """
        Partial derivatives of the inverse matrix, shape (3, 3, 3) indexed [k, i, j].

        Central differences with one Richardson extrapolation step.
        """
        grad = np.empty((3, 3, 3))
        for k in range(3):
            step = np.zeros(3)
            step[k] = FD_STEP
            d_h = (self.inverse_matrix(x + step) - self.inverse_matrix(x - step)) / (2 * FD_STEP)
            half = step / 2
            d_h2 = (self.inverse_matrix(x + half) - self.inverse_matrix(x - half)) / FD_STEP
            grad[k] = (4.0 * d_h2 - d_h) / 3.0
        return grad

    def limit_inverse_matrix(self, x: np.ndarray, normal: np.ndarray, side: int) -> np.ndarray:
        """Inverse matrix evaluated just off an interface on the given side (+1 / -1)."""
        return self.inverse_matrix(x + side * 1e-9 * normal)


RadialFunction = Callable[[float], float]


def _derivative(fn: RadialFunction, s: float) -> float:
    h = FD_STEP * max(1.0, abs(s))
    d_h = (fn(s + h) - fn(s - h)) / (2 * h)
    d_h2 = (fn(s + h / 2) - fn(s - h / 2)) / h
    return (4.0 * d_h2 - d_h) / 3.0


class RadialSymTensorField(SymTensorField):
    """
    Spherically symmetric field radial(s) e e^T + tangential(s) (I - e e^T), s = |x|.

    Supplies closed-form inverses and inverse gradients so Hamiltonian ray
    tracing never differentiates numerically near the cloaking surface.
    """

    def __init__(
        self,
        radial: RadialFunction,
        tangential: RadialFunction,
        radial_derivative: Optional[RadialFunction] = None,
        tangential_derivative: Optional[RadialFunction] = None,
        singular_support: SingularSupport = EMPTY_SUPPORT,
        interface_radii: Iterable[float] = (),
        name: str = "radial-tensor",
    ):
        object.__setattr__(self, "radial", radial)
        object.__setattr__(self, "tangential", tangential)
        object.__setattr__(self, "radial_derivative", radial_derivative or (lambda s: _derivative(radial, s)))
        object.__setattr__(
            self, "tangential_derivative", tangential_derivative or (lambda s: _derivative(tangential, s))
        )
        super().__init__(
            rule=lambda x: radial_tensor_matrix(x, radial(float(np.linalg.norm(x))), tangential(float(np.linalg.norm(x)))),
            singular_support=singular_support,
            interface_radii=tuple(interface_radii),
            name=name,
        )

    def eigenvalues_at(self, s: float) -> Tuple[float, float]:
        return self.radial(s), self.tangential(s)

    def inverse_matrix(self, x: np.ndarray) -> np.ndarray:
        s = float(np.linalg.norm(x))
        return radial_tensor_matrix(x, 1.0 / self.radial(s), 1.0 / self.tangential(s))

    def inverse_gradient(self, x: np.ndarray) -> np.ndarray:
        s = float(np.linalg.norm(x))
        if s < SINGULAR_CUTOFF:
            # smooth radial fields are stationary at the origin
            return np.zeros((3, 3, 3))
        e = x / s
        a, b = self.radial(s), self.tangential(s)
        alpha, beta = 1.0 / a, 1.0 / b
        d_alpha = -self.radial_derivative(s) / (a * a)
        d_beta = -self.tangential_derivative(s) / (b * b)
        eye = np.eye(3)
        proj = np.outer(e, e)
        # d e_i / d x_k = (delta_ik - e_i e_k) / s
        de = (eye - proj) / s
        grad = (
            d_beta * np.einsum("k,ij->kij", e, eye)
            + (d_alpha - d_beta) * np.einsum("k,ij->kij", e, proj)
            + (alpha - beta) * (np.einsum("ki,j->kij", de, e) + np.einsum("i,kj->kij", e, de))
        )
        return grad

    def limit_inverse_matrix(self, x: np.ndarray, normal: np.ndarray, side: int) -> np.ndarray:
        s = float(np.linalg.norm(x))
        s_side = s * (1.0 + side * 1e-12) + side * 1e-12
        return radial_tensor_matrix(x, 1.0 / self.radial(s_side), 1.0 / self.tangential(s_side))


def euclidean_metric() -> RadialSymTensorField:
    """Flat metric delta_{ij}."""
    return RadialSymTensorField(
        radial=lambda s: 1.0,
        tangential=lambda s: 1.0,
        radial_derivative=lambda s: 0.0,
        tangential_derivative=lambda s: 0.0,
        name="euclidean",
    )
