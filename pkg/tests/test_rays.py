"""
Tests for Hamiltonian ray tracing through flat space and the cloak metric.
"""

import math

import numpy as np
import pytest

from src.designs import cloak_metric_field
from src.errors import DomainError, ParameterError
from src.geometry import SymTensorField, euclidean_metric
from src.rays import (
    RayState,
    TerminationReason,
    compare_traces,
    hamiltonian,
    impact_parameter,
    polyline_frame,
    ray_fan,
    refract,
    trace,
    trace_rays,
    travel_time_compare,
)


def sphere_exit(x0, d, radius):
    d = np.asarray(d, dtype=float) / np.linalg.norm(d)
    b = float(np.dot(x0, d))
    s = -b + math.sqrt(b * b - float(np.dot(x0, x0)) + radius * radius)
    return np.asarray(x0, dtype=float) + s * d, s


class TestFlatTracing:
    """Test cases for rays in the Euclidean metric."""

    @pytest.fixture
    def result(self):
        start = RayState.launch((-1.0, 0.3, 0.2), (1.0, 0.5, 0.0))
        return trace(euclidean_metric(), start, domain_radius=4.0)

    def test_exits_on_straight_line(self, result):
        exit_point, chord = sphere_exit((-1.0, 0.3, 0.2), (1.0, 0.5, 0.0), 4.0)
        assert result.reason == TerminationReason.EXITED
        assert np.allclose(result.final.x, exit_point, atol=1e-9)
        assert result.optical_length == pytest.approx(chord, rel=1e-9)

    def test_momentum_is_constant(self, result):
        assert np.allclose(result.final.p, [1.0, 0.5, 0.0], atol=1e-12)

    def test_hamiltonian_conserved(self, result):
        assert result.hamiltonian_drift < 1e-12

    def test_records(self, result):
        records = result.to_records()
        assert set(records[0]) == {"t", "x", "y", "z", "px", "py", "pz", "H", "length", "piece"}
        assert records[0]["H"] == pytest.approx(0.625)

    def test_t_max_stops_trace(self):
        start = RayState.launch((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        result = trace(euclidean_metric(), start, t_max=1.0, domain_radius=10.0)
        assert result.reason == TerminationReason.T_MAX
        assert result.final.x[0] == pytest.approx(1.0, rel=1e-9)

    def test_start_outside_exit_sphere(self):
        """Test that a ray launched outside the exit sphere exits on its far side."""
        start = RayState.launch((-3.0, 3.0, 0.0), (1.0, 0.0, 0.0))
        result = trace(euclidean_metric(), start, domain_radius=4.0)
        assert result.reason == TerminationReason.EXITED
        assert np.allclose(result.final.x, [math.sqrt(7.0), 3.0, 0.0], atol=1e-9)
        assert result.optical_length == pytest.approx(3.0 + math.sqrt(7.0), rel=1e-9)

    def test_step_budget(self):
        start = RayState.launch((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        result = trace(euclidean_metric(), start, domain_radius=10.0, max_steps=3)
        assert result.reason == TerminationReason.MAX_STEPS

    def test_rejects_zero_momentum(self):
        with pytest.raises(DomainError):
            RayState.launch((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ParameterError):
            trace(euclidean_metric(), RayState.launch((0, 0, 0), (1, 0, 0)), tol=0.0)


class TestRefraction:
    """Test cases for covector refraction at a metric jump."""

    @pytest.fixture
    def slab(self):
        # metric 4 I inside |x| = 2, Euclidean outside
        return SymTensorField(
            rule=lambda x: (4.0 if np.linalg.norm(x) <= 2.0 else 1.0) * np.eye(3),
            interface_radii=(2.0,),
        )

    def test_keeps_hamiltonian_and_tangential_covector(self, slab):
        x = np.array([2.0, 0.0, 0.0])
        normal = np.array([1.0, 0.0, 0.0])
        p = np.array([-0.6, 0.8, 0.0])
        p_new, reflected = refract(slab, x, p, normal, -1)
        assert not reflected
        assert p_new[1] == pytest.approx(0.8)
        H_out = 0.5 * float(p @ p)
        H_in = 0.125 * float(p_new @ p_new)
        assert H_in == pytest.approx(H_out)
        assert p_new[0] < 0.0

    def test_total_internal_reflection(self, slab):
        x = np.array([2.0, 0.0, 0.0])
        normal = np.array([1.0, 0.0, 0.0])
        # grazing covector from inside: tangential part too large to exist outside
        p = np.array([0.2, 1.9, 0.0])
        p_new, reflected = refract(slab, x, p, normal, +1)
        assert reflected
        assert p_new[0] == pytest.approx(-0.2)
        assert p_new[1] == pytest.approx(1.9)


class TestCloakRays:
    """Test cases for rays through the cloak metric."""

    @pytest.fixture(scope="class")
    def metric(self):
        return cloak_metric_field()

    def test_straight_line_oracle(self, metric):
        rays = ray_fan(4, impact_range=(0.4, 1.6), random=False)
        compare = travel_time_compare(metric, rays)
        assert (compare["reason"] == "exited").all()
        assert not compare["flagged"].any()
        assert compare["length_error"].max() < 1e-6
        assert compare["path_error"].max() < 1e-6
        assert compare["hamiltonian_drift"].max() < 1e-7

    def test_rays_outside_shell_never_enter(self, metric):
        rays = ray_fan(2, impact_range=(2.2, 3.0), random=False)
        results = trace_rays(metric, rays, domain_radius=4.0)
        for result in results:
            assert result.reason == TerminationReason.EXITED
            assert np.linalg.norm(result.positions(), axis=1).min() > 2.0
        compare = compare_traces(rays, results)
        assert not compare["flagged"].any()

    def test_head_on_ray_hits_tangency_guard(self, metric):
        start = RayState.launch((-3.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        result = trace(metric, start, domain_radius=4.0)
        assert result.reason == TerminationReason.TANGENCY_GUARD
        assert result.final.position.norm() > 1.0

    def test_time_reversal(self, metric):
        """Test that a reversed ray retraces its path back through the cloak."""
        b = 0.8
        forward = trace(metric, RayState.launch((-3.0, b, 0.0), (1.0, 0.0, 0.0)), domain_radius=4.0)
        mid = next(s for s in forward.samples if s.position.x > 2.5)
        back = trace(metric, mid.reversed(), domain_radius=4.0)
        assert back.reason == TerminationReason.EXITED
        assert np.allclose(back.final.x, [-math.sqrt(16.0 - b * b), b, 0.0], atol=1e-6)
        direction = back.final.p / np.linalg.norm(back.final.p)
        assert np.allclose(direction, [-1.0, 0.0, 0.0], atol=1e-6)

    def test_start_on_singular_set_rejected(self, metric):
        with pytest.raises(DomainError):
            trace(metric, RayState.launch((1.0, 0.0, 0.0), (1.0, 0.0, 0.0)))

    def test_hamiltonian_helper(self, metric):
        x = np.array([1.5, 0.0, 0.0])
        # radial eigenvalue 4: H = p_r^2 / 8
        assert hamiltonian(metric, x, np.array([1.0, 0.0, 0.0])) == pytest.approx(0.125)


class TestBatch:
    """Test cases for ray fans and batch tables."""

    def test_fan_is_seeded(self):
        first = ray_fan(5, seed=3)
        second = ray_fan(5, seed=3)
        assert [r.position for r in first] == [r.position for r in second]

    def test_fan_impacts_in_range(self):
        for ray in ray_fan(20, impact_range=(0.1, 1.9), seed=1):
            assert 0.1 <= impact_parameter(ray) <= 1.9

    def test_empty_fan(self):
        assert ray_fan(0) == []
        compare = travel_time_compare(cloak_metric_field(), [])
        assert compare.empty
        assert "flagged" in compare.columns

    def test_polyline_frame(self):
        results = trace_rays(euclidean_metric(), ray_fan(2, random=False), domain_radius=4.0, threads=2)
        frame = polyline_frame(results)
        assert list(frame.columns) == ["ray", "t", "x", "y", "z", "px", "py", "pz", "H", "length", "piece"]
        assert set(frame["ray"]) == {0, 1}

    def test_empty_polyline_frame_keeps_columns(self):
        assert list(polyline_frame([]).columns)[:2] == ["ray", "t"]
