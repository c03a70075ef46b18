"""
Tests for tensors, fields and the metric/conductivity correspondence.
"""

import math

import numpy as np
import pytest

from src.designs import cloak_conductivity_field, cloak_metric_field
from src.errors import DomainError, SingularSetError
from src.geometry import (
    Point3,
    RadialSymTensorField,
    SymTensor3,
    SymTensorField,
    conductivity_to_metric,
    euclidean_metric,
    metric_to_conductivity,
    require_spd,
    spherical_components,
    spherical_frame,
    volume_density,
)


class TestSymTensor3:
    """Test cases for the symmetric tensor type."""

    def test_from_matrix_symmetrizes(self):
        """Test that an asymmetric matrix is averaged with its transpose."""
        t = SymTensor3.from_matrix([[1.0, 2.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 4.0]])
        assert t.xy == pytest.approx(1.0)
        assert np.allclose(t.matrix, t.matrix.T)

    def test_rejects_wrong_shape(self):
        with pytest.raises(DomainError):
            SymTensor3.from_matrix(np.eye(2))

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            SymTensor3.from_matrix([[np.nan, 0, 0], [0, 1, 0], [0, 0, 1]])

    def test_inverse(self):
        t = SymTensor3.diagonal(2.0, 4.0, 8.0)
        assert t.inverse().allclose(SymTensor3.diagonal(0.5, 0.25, 0.125))

    def test_require_spd_rejects_semidefinite(self):
        """Test that zero and negative eigenvalues are rejected."""
        with pytest.raises(DomainError):
            require_spd(SymTensor3.diagonal(1.0, 0.0, 1.0))
        with pytest.raises(DomainError):
            require_spd(SymTensor3.diagonal(1.0, -1.0, 1.0))

    def test_point_norm(self):
        assert Point3(3.0, 4.0, 0.0).norm() == pytest.approx(5.0)


class TestMetricConductivity:
    """Test cases for the metric <-> conductivity maps."""

    @pytest.fixture
    def sigma(self):
        return SymTensor3.diagonal(1.0, 2.0, 3.0)

    def test_conductivity_to_metric(self, sigma):
        """Test g = det(sigma) sigma^{-1}."""
        g = conductivity_to_metric(sigma)
        assert g.allclose(SymTensor3.diagonal(6.0, 3.0, 2.0))

    def test_round_trip(self, sigma):
        """Test that the two maps are mutually inverse."""
        assert metric_to_conductivity(conductivity_to_metric(sigma)).allclose(sigma, rtol=1e-12)

    def test_volume_density_matches_det_sigma(self, sigma):
        """Test |g|^{1/2} = det(sigma) in three dimensions."""
        g = conductivity_to_metric(sigma)
        assert volume_density(g) == pytest.approx(sigma.determinant())

    def test_rotated_tensor_round_trip(self):
        angle = 0.3
        rot = np.array([[math.cos(angle), -math.sin(angle), 0.0],
                        [math.sin(angle), math.cos(angle), 0.0],
                        [0.0, 0.0, 1.0]])
        sigma = SymTensor3.from_matrix(rot @ np.diag([0.5, 2.0, 1.5]) @ rot.T)
        back = metric_to_conductivity(conductivity_to_metric(sigma))
        assert back.allclose(sigma, rtol=1e-12, atol=1e-14)

    def test_metric_to_conductivity_rejects_degenerate(self):
        with pytest.raises(DomainError):
            metric_to_conductivity(SymTensor3.diagonal(1.0, 1.0, 0.0))


class TestSphericalViews:
    """Test cases for spherical frame and density components."""

    def test_frame_is_orthonormal(self):
        frame = spherical_frame((0.3, -0.7, 0.5))
        assert np.allclose(frame @ frame.T, np.eye(3), atol=1e-14)

    def test_frame_singular_on_axis(self):
        with pytest.raises(SingularSetError):
            spherical_frame((0.0, 0.0, 2.0))

    def test_cloak_frame_components(self):
        """Test the orthonormal eigenvalues 2(r-1)^2/r^2 and 2 at r = 1.5."""
        sigma = cloak_conductivity_field()((1.5, 0.0, 0.0))
        frame = spherical_components(sigma, (1.5, 0.0, 0.0))
        assert np.allclose(frame, np.diag([2.0 / 9.0, 2.0, 2.0]), atol=1e-14)

    def test_cloak_density_components(self):
        """Test the coordinate-density view diag(2(r-1)^2, 2 sin(theta), 2/sin(theta))."""
        sigma = cloak_conductivity_field()((1.5, 0.0, 0.0))
        density = spherical_components(sigma, (1.5, 0.0, 0.0), basis="density")
        assert np.allclose(density, np.diag([0.5, 2.0, 2.0]), atol=1e-13)

    def test_unknown_basis(self):
        with pytest.raises(DomainError):
            spherical_components(SymTensor3.identity(), (1.0, 1.0, 1.0), basis="polar")


class TestCloakFields:
    """Test cases for the cloak conductivity and metric fields."""

    def test_metric_is_metric_of_conductivity(self):
        point = (0.8, 0.6, 0.9)
        sigma = cloak_conductivity_field()(point)
        g = cloak_metric_field()(point)
        assert conductivity_to_metric(sigma).allclose(g, rtol=1e-12)

    def test_bulk_density(self):
        """Test det(sigma) = 8(r-1)^2/r^2 and |g| = det(sigma)^2 at r = 1.5."""
        sigma = cloak_conductivity_field()((1.5, 0.0, 0.0))
        g = cloak_metric_field()((1.5, 0.0, 0.0))
        assert sigma.determinant() == pytest.approx(8.0 / 9.0)
        assert g.determinant() == pytest.approx(64.0 / 81.0)

    def test_identity_outside_shell(self):
        assert cloak_conductivity_field()((3.0, 0.0, 0.0)).allclose(SymTensor3.identity())
        assert cloak_metric_field()((0.0, 0.5, 0.0)).allclose(SymTensor3.identity())

    def test_singular_on_cloaking_surface(self):
        with pytest.raises(SingularSetError):
            cloak_metric_field()((1.0, 0.0, 0.0))
        with pytest.raises(SingularSetError):
            cloak_conductivity_field()((0.0, 0.6, 0.8))

    def test_closed_form_inverse_gradient(self):
        """Test the analytic inverse gradient against finite differences."""
        field = cloak_metric_field()
        generic = SymTensorField(rule=field.rule)
        x = np.array([1.2, 0.3, -0.4])
        assert np.allclose(field.inverse_gradient(x), generic.inverse_gradient(x), rtol=1e-6, atol=1e-6)

    def test_euclidean_inverse_is_identity(self):
        flat = euclidean_metric()
        assert np.allclose(flat.inverse_matrix(np.array([0.1, 2.0, -3.0])), np.eye(3))
        assert np.allclose(flat.inverse_gradient(np.array([0.1, 2.0, -3.0])), 0.0)

    def test_inverse_gradient_at_origin(self):
        """Test that radial fields have a finite, vanishing inverse gradient at the origin."""
        origin = np.zeros(3)
        smooth = RadialSymTensorField(radial=lambda s: 1.0 + s * s, tangential=lambda s: 1.0 + s * s)
        for field in (euclidean_metric(), smooth, cloak_metric_field()):
            grad = field.inverse_gradient(origin)
            assert np.all(np.isfinite(grad))
            assert np.allclose(grad, 0.0)
        assert np.allclose(smooth.inverse_matrix(origin), np.eye(3))
