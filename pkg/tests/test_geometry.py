import math

import numpy as np
import pytest

from vtangent.errors import ArgumentError, FieldEvaluationError
from vtangent.sphere_geometry import (
    FieldSpec,
    SpherePoint,
    field_jet,
    flow_point,
    geodesic_distance,
    kernel_argument,
    metric_at,
    norms,
    parse_field,
    perp_components,
)

from conftest import random_point


class TestSpherePoint:
    def test_poles_rejected(self):
        for phi in (0.0, math.pi, -0.2, 3.5):
            with pytest.raises(ArgumentError):
                SpherePoint(0.0, phi)

    def test_theta_wraps(self):
        p = SpherePoint(7.0, 1.0)
        assert p.theta == pytest.approx(7.0 - 2.0 * math.pi)
        assert SpherePoint(-1.0, 1.0).theta == pytest.approx(2.0 * math.pi - 1.0)


class TestMetric:
    def test_equator_is_identity(self):
        np.testing.assert_allclose(metric_at(SpherePoint(0.3, math.pi / 2)), np.eye(2))

    def test_values_at_pi_sixth(self):
        g = metric_at(SpherePoint(0.0, math.pi / 6))
        np.testing.assert_allclose(g, np.diag([0.25, 1.0]), atol=1e-15)

    def test_determinant(self):
        g = metric_at(SpherePoint(1.0, math.pi / 3))
        assert np.linalg.det(g) == pytest.approx(0.75, rel=1e-14)


class TestKernelArgument:
    def test_coincident(self, rng):
        p = random_point(rng)
        assert kernel_argument(p, p) == pytest.approx(1.0, abs=1e-15)

    def test_antipodal_equatorial(self):
        x = SpherePoint(0.2, math.pi / 2)
        y = SpherePoint(0.2 + math.pi, math.pi / 2)
        assert kernel_argument(x, y) == pytest.approx(-1.0, abs=1e-15)

    def test_orthogonal(self):
        x = SpherePoint(0.0, math.pi / 2)
        y = SpherePoint(math.pi / 2, math.pi / 2)
        assert kernel_argument(x, y) == pytest.approx(0.0, abs=1e-15)

    def test_symmetry_and_shift_invariance(self, rng):
        for _ in range(20):
            x, y = random_point(rng), random_point(rng)
            h = kernel_argument(x, y)
            assert kernel_argument(y, x) == pytest.approx(h, abs=1e-15)
            shift = float(rng.uniform(0, 2 * math.pi))
            xs = SpherePoint(x.theta + shift, x.phi)
            ys = SpherePoint(y.theta + shift, y.phi)
            assert kernel_argument(xs, ys) == pytest.approx(h, abs=1e-12)


class TestFieldJet:
    def test_rotation_is_constant(self, rng):
        j = field_jet(parse_field("rotation"), random_point(rng))
        assert (j.v1, j.v2) == (1.0, 0.0)
        assert j.d_theta_v1 == j.d_phi_v1 == j.d_theta_v2 == j.d_phi_v2 == 0.0

    def test_zgrad_at_equator(self):
        j = field_jet(parse_field("zgrad"), SpherePoint(1.1, math.pi / 2))
        assert j.v1 == 0.0
        assert j.v2 == pytest.approx(-1.0, abs=1e-15)
        assert j.d_phi_v2 == pytest.approx(0.0, abs=1e-12)

    def test_custom_field_example(self):
        spec = parse_field("custom:cos theta;sin phi")
        j = field_jet(spec, SpherePoint(0.0, math.pi / 2))
        assert j.v1 == pytest.approx(1.0, abs=1e-12)
        assert j.v2 == pytest.approx(1.0, abs=1e-12)
        for partial in (j.d_theta_v1, j.d_phi_v1, j.d_theta_v2, j.d_phi_v2):
            assert partial == pytest.approx(0.0, abs=1e-8)

    def test_builtin_partials_match_finite_differences(self, rng, fields):
        h = 1e-6
        for spec in fields.values():
            for _ in range(10):
                p = random_point(rng)
                j = field_jet(spec, p)
                fd = [
                    (spec.v1(p.theta + h, p.phi) - spec.v1(p.theta - h, p.phi)) / (2 * h),
                    (spec.v1(p.theta, p.phi + h) - spec.v1(p.theta, p.phi - h)) / (2 * h),
                    (spec.v2(p.theta + h, p.phi) - spec.v2(p.theta - h, p.phi)) / (2 * h),
                    (spec.v2(p.theta, p.phi + h) - spec.v2(p.theta, p.phi - h)) / (2 * h),
                ]
                got = (j.d_theta_v1, j.d_phi_v1, j.d_theta_v2, j.d_phi_v2)
                for a, b in zip(got, fd):
                    assert a == pytest.approx(float(b), abs=1e-8)


class TestPerpAndNorms:
    def test_perp_rotation_equator(self):
        p = SpherePoint(0.0, math.pi / 2)
        j = field_jet(parse_field("rotation"), p)
        assert perp_components(j, p) == (0.0, pytest.approx(-1.0))

    def test_perp_zgrad_equator(self):
        p = SpherePoint(0.0, math.pi / 2)
        j = field_jet(parse_field("zgrad"), p)
        w1, w2 = perp_components(j, p)
        assert w1 == pytest.approx(-1.0)
        assert w2 == pytest.approx(0.0, abs=1e-15)

    def test_perp_is_metric_orthogonal(self, rng, fields):
        for spec in fields.values():
            for _ in range(17):
                p = random_point(rng)
                j = field_jet(spec, p)
                w1, w2 = perp_components(j, p)
                s2 = math.sin(p.phi) ** 2
                assert s2 * j.v1 * w1 + j.v2 * w2 == pytest.approx(0.0, abs=1e-12)

    def test_norm_examples(self):
        rot = parse_field("rotation")
        p = SpherePoint(0.0, math.pi / 2)
        assert norms(field_jet(rot, p), p) == (pytest.approx(1.0), pytest.approx(1.0))
        p = SpherePoint(0.0, math.pi / 6)
        nv, nw = norms(field_jet(rot, p), p)
        assert nv == pytest.approx(0.5, rel=1e-14)
        assert nw == pytest.approx(0.25, rel=1e-14)

    def test_perp_norm_identity(self, rng, fields):
        for _ in range(100):
            spec = list(fields.values())[int(rng.integers(0, 3))]
            p = random_point(rng, margin=0.05)
            j = field_jet(spec, p)
            nv, nw = norms(j, p)
            assert nw == pytest.approx(nv * math.sin(p.phi), abs=1e-12)

    def test_orientation_determinant(self, rng, fields):
        # coordinate determinant of (V | Vperp) is -|V|^2; the sign is
        # uniform over the chart, which is what orientation needs
        for spec in fields.values():
            for _ in range(34):
                p = random_point(rng)
                j = field_jet(spec, p)
                w1, w2 = perp_components(j, p)
                det = j.v1 * w2 - j.v2 * w1
                nv, _ = norms(j, p)
                assert det == pytest.approx(-nv * nv, abs=1e-12)


class TestParseField:
    def test_unknown_name(self):
        with pytest.raises(ArgumentError):
            parse_field("coriolis")

    def test_custom_needs_two_parts(self):
        with pytest.raises(ArgumentError):
            parse_field("custom:sin theta")

    def test_name_round_trip(self, rng):
        spec = parse_field("custom:theta*0.5 - cos phi;sin(theta)*2")
        again = parse_field(spec.name)
        for _ in range(5):
            p = random_point(rng)
            assert float(again.v1(p.theta, p.phi)) == float(spec.v1(p.theta, p.phi))
            assert float(again.v2(p.theta, p.phi)) == float(spec.v2(p.theta, p.phi))

    def test_evaluation_error_surfaces(self):
        spec = parse_field("custom:1/(theta-theta);0")
        with pytest.raises(FieldEvaluationError):
            field_jet(spec, SpherePoint(0.5, 1.0))

    def test_tilted_declares_interior_zeros(self):
        spec = parse_field("tilted")
        assert len(spec.zeros) == 2
        for theta, phi, order in spec.zeros:
            assert order == 1
            j = field_jet(spec, SpherePoint(theta, phi))
            nv, _ = norms(j, SpherePoint(theta, phi))
            assert nv == pytest.approx(0.0, abs=1e-12)


class TestFlowAndDistance:
    def test_rotation_flow_advances_theta(self):
        p = SpherePoint(1.0, 0.8)
        q = flow_point(parse_field("rotation"), p, 0.3)
        assert q.theta == pytest.approx(1.3, rel=1e-12)
        assert q.phi == pytest.approx(0.8, rel=1e-12)

    def test_distance_is_a_metric(self, rng):
        x, y = random_point(rng), random_point(rng)
        assert geodesic_distance(x, x) == pytest.approx(0.0, abs=1e-7)
        assert geodesic_distance(x, y) == pytest.approx(geodesic_distance(y, x))
        assert geodesic_distance(x, y) <= math.pi + 1e-12


def test_field_spec_is_shareable():
    spec = parse_field("tilted")
    th = np.linspace(0.0, 2 * math.pi, 11)
    ph = np.full(11, 1.2)
    v1 = np.asarray(spec.v1(th, ph))
    assert v1.shape == (11,)
    assert np.all(np.isfinite(v1))
