"""
Tests for the radial medium profiles and the Maxwell/wormhole generators.
"""

import math

import numpy as np
import pytest

from src.designs import (
    OUTER_RADIUS,
    QuantumCloakSpec,
    collimator_warp,
    default_truncation,
    free_quantum_profile,
    handle_metric_field,
    homogeneous_profile,
    ideal_cloak_profile,
    laminate_phases,
    layered_isotropic_profile,
    maxwell_cloak_tensors,
    product_warp,
    quantum_potential_profile,
    shell_average_bulk,
    truncated_cloak_profile,
    wormhole_geometry,
)
from src.errors import DomainError, ParameterError, SingularSetError
from src.geometry import SymTensor3


class TestIdealCloak:
    """Test cases for the ideal cloak profile."""

    @pytest.fixture
    def profile(self):
        return ideal_cloak_profile()

    def test_eigenvalues_at_midshell(self, profile):
        """Test a = 2(r-1)^2/r^2, b = 2 and w = 8(r-1)^2/r^2 at r = 1.5."""
        c = profile.coefficients(1.5)
        assert c.radial == pytest.approx(2.0 / 9.0)
        assert c.tangential == pytest.approx(2.0)
        assert c.bulk == pytest.approx(8.0 / 9.0)

    def test_flux_coefficient_vanishes_at_surface(self, profile):
        assert profile.flux_coefficient(1.5) == pytest.approx(0.5)
        assert profile.flux_coefficient(1.0, side=+1) == pytest.approx(0.0, abs=1e-15)
        assert profile.intervals[1].degenerate_inner

    def test_hidden_region(self, profile):
        c = profile.coefficients(0.5)
        assert (c.radial, c.tangential, c.bulk) == (2.0, 2.0, 8.0)

    def test_sample_grid(self, profile):
        table = profile.sample(50)
        assert len(table) == 50
        assert table["r"].iloc[0] == pytest.approx(0.02)
        row = table.iloc[(table["r"] - 1.5).abs().idxmin()]
        assert row["bulk_squared"] == pytest.approx(64.0 / 81.0, abs=1e-5)

    def test_records(self, profile):
        records = profile.to_records(samples_per_interval=3)
        assert records["outer_radius"] == OUTER_RADIUS
        assert [iv["kind"] for iv in records["intervals"]] == ["constant", "chart"]
        assert records["intervals"][1]["degenerate_inner"] is True


class TestTruncatedAndLayered:
    """Test cases for truncated and layered cloaks."""

    @pytest.mark.parametrize("R", [1.0, 2.0, 3.0])
    def test_truncated_rejects_bad_radius(self, R):
        with pytest.raises(ParameterError):
            truncated_cloak_profile(R)

    def test_truncated_is_not_degenerate(self):
        profile = truncated_cloak_profile(1.1)
        assert profile.interface_radii == [1.1]
        assert not profile.intervals[1].degenerate_inner
        assert profile.flux_coefficient(1.1, side=+1) == pytest.approx(2.0 * 0.01)

    def test_laminate_means(self):
        """Test harmonic mean a and arithmetic mean b of the two phases."""
        high, low = laminate_phases(0.5, 2.0)
        assert (high + low) / 2 == pytest.approx(2.0)
        assert 2.0 / (1.0 / high + 1.0 / low) == pytest.approx(0.5)
        assert high > low > 0

    def test_laminate_rejects_inverted_targets(self):
        with pytest.raises(DomainError):
            laminate_phases(3.0, 2.0)

    def test_layered_structure(self):
        profile = layered_isotropic_profile(1.25, 4)
        assert len(profile.intervals) == 9
        assert profile.interface_radii[0] == pytest.approx(1.25)
        for interval in profile.intervals[1:]:
            c = interval.coefficients(0.5 * (interval.r_inner + interval.r_outer))
            assert c.radial == pytest.approx(c.tangential)

    def test_layered_bulk_modes(self):
        exact = layered_isotropic_profile(1.5, 2, bulk_mode="exact")
        average = layered_isotropic_profile(1.5, 2, bulk_mode="average")
        interval = average.intervals[1]
        assert interval.coefficients(interval.r_inner).bulk == pytest.approx(
            shell_average_bulk(interval.r_inner, interval.r_outer))
        assert exact.bulk(1.6) == pytest.approx(8.0 * 0.36 / 2.56)

    def test_layered_rejects_unknown_mode(self):
        with pytest.raises(ParameterError):
            layered_isotropic_profile(1.5, 2, bulk_mode="median")

    def test_shell_average_bulk(self):
        """Test the closed form against a midpoint rule."""
        r = np.linspace(1.2, 1.4, 20001)
        mid = 0.5 * (r[1:] + r[:-1])
        expected = float(np.mean(8.0 * (mid - 1.0) ** 2 / mid ** 2))
        assert shell_average_bulk(1.2, 1.4) == pytest.approx(expected, rel=1e-8)

    def test_partition_is_checked(self):
        from src.designs import ConstantMedium, RadialInterval, RadialMediumProfile
        medium = ConstantMedium(1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            RadialMediumProfile(intervals=(
                RadialInterval(0.0, 1.0, medium=medium),
                RadialInterval(1.1, 2.0, medium=medium),
            ))


class TestQuantumProfile:
    """Test cases for the approximate quantum cloak."""

    def test_default_schedule(self):
        assert default_truncation(1) == 1.5
        assert default_truncation(4) == pytest.approx(1.0625)

    def test_hidden_region_weight_and_potential(self):
        profile = quantum_potential_profile(QuantumCloakSpec(4, 2.0))
        assert profile.weight(0.5) == pytest.approx(math.sqrt(2.0))
        assert profile.potential(0.5) == 0.0
        assert profile.potential(1.03) == 0.0

    def test_shell_potentials(self):
        """Test V = E - E w / gamma on each shell."""
        E = 3.0
        profile = quantum_potential_profile(QuantumCloakSpec(2, E))
        interval = profile.intervals[2]
        gamma = interval.weight ** 2
        expected = E - E * shell_average_bulk(interval.r_inner, interval.r_outer) / gamma
        assert interval.coefficients(interval.r_inner + 1e-3).potential == pytest.approx(expected)

    def test_interior_potential(self):
        profile = quantum_potential_profile(QuantumCloakSpec(2, 1.0, interior_potential=10.0))
        assert profile.potential(0.5) == pytest.approx(10.0)
        radial = quantum_potential_profile(QuantumCloakSpec(2, 1.0, interior_potential=lambda r: r * r))
        assert radial.potential(0.5) == pytest.approx(0.25)

    def test_rejects_zero_layers(self):
        with pytest.raises(ParameterError):
            QuantumCloakSpec(0, 1.0)

    def test_free_profiles(self):
        assert free_quantum_profile() == homogeneous_profile()
        assert free_quantum_profile(5.0).potential(0.2) == pytest.approx(5.0)


class TestMaxwellAndWormhole:
    """Test cases for the Maxwell tensors and the wormhole descriptor."""

    def test_maxwell_tensors_equal(self):
        eps, mu = maxwell_cloak_tensors((1.2, 0.3, 0.1))
        assert eps == mu
        assert eps.is_positive_definite()

    def test_maxwell_identity_outside(self):
        eps, _ = maxwell_cloak_tensors((0.0, 0.0, 2.5))
        assert eps == SymTensor3.identity()

    def test_maxwell_singular_surface(self):
        with pytest.raises(SingularSetError):
            maxwell_cloak_tensors((0.0, 1.0, 0.0))

    def test_wormhole_geometry(self):
        design = wormhole_geometry(5.0)
        assert len(design.pieces) == 2
        assert [t.label for t in design.transitions] == ["mouth-O", "mouth-P"]
        assert design.transitions[1].target_center == (0.0, 0.0, 5.0)

    def test_wormhole_rejects_close_balls(self):
        with pytest.raises(ParameterError):
            wormhole_geometry(3.0)

    def test_collimator_warp(self):
        warp = collimator_warp(0.2)
        assert warp.radius(0.0) == pytest.approx(1.0)
        assert warp.radius(0.5) == pytest.approx(0.2)
        assert warp.radius(1.0) == pytest.approx(1.0)

    def test_handle_metric_product(self):
        field = handle_metric_field(product_warp(), handle_length=1.0)
        assert field.eigenvalues_at(1.5) == (1.0, pytest.approx(1.0 / 2.25))
