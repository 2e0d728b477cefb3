import math

import numpy as np
import pytest

from vtangent.covariance_engine import (
    covariance_closed_form,
    covariance_fd_oracle,
    kernel_moment_1,
    kernel_moment_2,
    nondegeneracy_check,
    tilde_coeffs,
)
from vtangent.errors import ArgumentError, DegeneratePointError
from vtangent.legendre import legendre_jet
from vtangent.sphere_geometry import SpherePoint, field_jet, parse_field

from conftest import random_point


def factored_tilde(fj, p):
    """Second transcription of the three coefficient sums.

    The package keeps the terms in collected-multiplicity form; here the
    same sums are written through the two contractions
    A = v.grad(v1), B = v.grad(v2), which is short enough to audit by
    hand. Agreement checks both transcriptions at once.
    """
    s, c = math.sin(p.phi), math.cos(p.phi)
    v1, v2 = fj.v1, fj.v2
    A = v1 * fj.d_theta_v1 + v2 * fj.d_phi_v1
    B = v1 * fj.d_theta_v2 + v2 * fj.d_phi_v2
    nsq = v1 * v1 * s * s + v2 * v2
    t24 = s * s * v1 * A + v2 * B + v1 * v1 * v2 * s * c
    t34 = s * s * v2 * A - s * s * v1 * B + 2.0 * v1 * v2 * v2 * s * c + v1**3 * c * s**3
    t44 = (s * A + 2.0 * v1 * v2 * c) ** 2 + (B - v1 * v1 * s * c) ** 2 + nsq * nsq
    return t24, t34, t44


class TestKernelMoments:
    def test_match_legendre_endpoint_derivatives(self):
        for l in (2, 5, 30):
            jet = legendre_jet(l, 1.0, k_max=2)
            assert kernel_moment_1(l) == jet.d1
            assert kernel_moment_2(l) == jet.d2


class TestTildeCoeffs:
    def test_rotation_equator(self):
        p = SpherePoint(0.0, math.pi / 2)
        tc = tilde_coeffs(field_jet(parse_field("rotation"), p), p)
        assert tc.a24_tilde == pytest.approx(0.0, abs=1e-15)
        assert tc.a34_tilde == pytest.approx(0.0, abs=1e-15)
        assert tc.a44_1_tilde == pytest.approx(1.0, rel=1e-14)

    def test_rotation_at_pi_third(self):
        p = SpherePoint(0.0, math.pi / 3)
        tc = tilde_coeffs(field_jet(parse_field("rotation"), p), p)
        assert tc.a34_tilde == pytest.approx(3.0 * math.sqrt(3.0) / 16.0, rel=1e-14)
        assert tc.a24_tilde == pytest.approx(0.0, abs=1e-15)
        # for the rotation field the (4,4) coefficient collapses to sin^2
        assert tc.a44_1_tilde == pytest.approx(math.sin(math.pi / 3) ** 2, rel=1e-14)

    def test_matches_factored_transcription(self, rng, fields):
        specs = list(fields.values()) + [parse_field("custom:cos(2*phi);sin theta - 0.3")]
        for spec in specs:
            for _ in range(8):
                p = random_point(rng)
                fj = field_jet(spec, p)
                tc = tilde_coeffs(fj, p)
                t24, t34, t44 = factored_tilde(fj, p)
                assert tc.a24_tilde == pytest.approx(t24, rel=1e-10, abs=1e-12)
                assert tc.a34_tilde == pytest.approx(t34, rel=1e-10, abs=1e-12)
                assert tc.a44_1_tilde == pytest.approx(t44, rel=1e-10, abs=1e-12)


class TestClosedForm:
    def test_rotation_equator_l2(self):
        p = SpherePoint(0.0, math.pi / 2)
        cov = covariance_closed_form(2, field_jet(parse_field("rotation"), p), p)
        assert cov.a11 == 1.0
        assert cov.a12 == cov.a13 == cov.a23 == 0.0
        assert cov.a22 == pytest.approx(3.0, rel=1e-14)
        assert cov.a14 == pytest.approx(-3.0, rel=1e-14)
        assert cov.a33 == pytest.approx(3.0, rel=1e-14)
        assert cov.a44 == pytest.approx(12.0, rel=1e-14)

    def test_a44_grouping_switch(self):
        p = SpherePoint(0.0, math.pi / 2)
        fj = field_jet(parse_field("rotation"), p)
        grouped = covariance_closed_form(2, fj, p)
        poly = covariance_closed_form(2, fj, p, a44_form="polynomial")
        assert grouped.a44 == pytest.approx(12.0, rel=1e-14)
        assert poly.a44 == pytest.approx(14.25, rel=1e-14)
        with pytest.raises(ArgumentError):
            covariance_closed_form(2, fj, p, a44_form="other")

    def test_exact_identities_hold_everywhere(self, rng, fields):
        for spec in fields.values():
            for l in (3, 7, 15):
                p = random_point(rng)
                cov = covariance_closed_form(l, field_jet(spec, p), p)
                assert cov.a11 == 1.0
                assert cov.a12 == 0.0 and cov.a13 == 0.0 and cov.a23 == 0.0
                assert cov.a14 == pytest.approx(-cov.a22, rel=1e-14)

    def test_scaling_in_kernel_moments(self, rng):
        spec = parse_field("tilted")
        p = random_point(rng)
        fj = field_jet(spec, p)
        base = covariance_closed_form(3, fj, p)
        for l in (7, 20, 50):
            cov = covariance_closed_form(l, fj, p)
            r = kernel_moment_1(l) / kernel_moment_1(3)
            assert cov.a22 == pytest.approx(base.a22 * r, rel=1e-12)
            assert cov.a33 == pytest.approx(base.a33 * r, rel=1e-12)
            assert cov.a24 == pytest.approx(base.a24 * r, rel=1e-12)
            assert cov.a34 == pytest.approx(base.a34 * r, rel=1e-12)

    def test_a44_leading_order(self):
        # (3/8) |V|^4 l^4 dominates; at l = 200 the rest is O(1/l)
        p = SpherePoint(0.0, math.pi / 2)
        fj = field_jet(parse_field("rotation"), p)
        cov = covariance_closed_form(200, fj, p)
        assert abs(cov.a44 / (0.375 * 200**4) - 1.0) < 5.0 / 200

    def test_positive_semidefinite(self, rng, fields):
        for spec in fields.values():
            for l in (3, 7, 15):
                for _ in range(4):
                    p = random_point(rng)
                    m = covariance_closed_form(l, field_jet(spec, p), p).matrix
                    eig = np.linalg.eigvalsh(m)
                    assert eig.min() >= -1e-9 * np.trace(m)


class TestFdOracle:
    def test_step_validation(self, rng):
        spec = parse_field("rotation")
        p = random_point(rng)
        for bad in (5e-6, 2e-3, 0.0):
            with pytest.raises(ArgumentError):
                covariance_fd_oracle(3, spec, p, step=bad)

    def test_a11_is_one(self, rng):
        spec = parse_field("zgrad")
        cov = covariance_fd_oracle(4, spec, random_point(rng))
        assert cov.a11 == pytest.approx(1.0, abs=1e-11)

    def test_rotation_equator_l2_agreement(self):
        p = SpherePoint(0.0, math.pi / 2)
        spec = parse_field("rotation")
        closed = covariance_closed_form(2, field_jet(spec, p), p)
        oracle = covariance_fd_oracle(2, spec, p)
        for name in ("a14", "a22", "a24", "a33", "a34", "a44"):
            assert getattr(oracle, name) == pytest.approx(
                getattr(closed, name), rel=1e-5, abs=1e-9
            )

    def test_zero_entries_confirmed(self, rng, fields):
        specs = list(fields.values())
        for i in range(20):
            spec = specs[i % 3]
            p = random_point(rng)
            cov = covariance_fd_oracle(5, spec, p)
            assert cov.a23 == pytest.approx(0.0, abs=1e-7)
            assert cov.a12 == pytest.approx(0.0, abs=1e-7)
            assert cov.a13 == pytest.approx(0.0, abs=1e-7)


class TestNondegeneracy:
    def test_healthy_configurations(self):
        p = SpherePoint(0.4, math.pi / 2)
        spec = parse_field("rotation")
        for l in (2, 10, 100):
            ok, margin = nondegeneracy_check(l, spec, p)
            assert ok
            assert margin > 0.0
        ok, margin = nondegeneracy_check(100, spec, p)
        assert margin == pytest.approx(1.0, abs=0.15)

    def test_field_zero_rejected(self):
        spec = parse_field("tilted")
        theta, phi, _ = spec.zeros[0]
        with pytest.raises(DegeneratePointError):
            nondegeneracy_check(5, spec, SpherePoint(theta, phi))
