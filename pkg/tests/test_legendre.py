import math

import numpy as np
import pytest

from vtangent.errors import ArgumentError
from vtangent.legendre import assoc_legendre_jet, assoc_legendre_table, legendre_jet

from oracles import rodrigues_assoc_jet


def test_p3_at_half():
    assert legendre_jet(3, 0.5).value == pytest.approx(-0.4375, abs=1e-15)


def test_value_and_parity_at_endpoints():
    for l in (0, 1, 2, 7, 50, 125, 200):
        assert legendre_jet(l, 1.0).value == 1.0
        assert legendre_jet(l, -1.0).value == (-1.0) ** l


def test_endpoint_derivatives():
    jet = legendre_jet(5, 1.0)
    assert jet.value == 1.0
    assert jet.d1 == pytest.approx(15.0, rel=1e-14)
    assert legendre_jet(2, 1.0, k_max=2).d2 == pytest.approx(3.0, rel=1e-14)
    for l in (2, 3, 5, 10, 40):
        jet = legendre_jet(l, 1.0, k_max=3)
        neg = legendre_jet(l, -1.0, k_max=3)
        for k, (d, dn) in enumerate(
            zip((jet.value, jet.d1, jet.d2, jet.d3), (neg.value, neg.d1, neg.d2, neg.d3))
        ):
            if k > l:
                expected = 0.0
            else:
                expected = math.factorial(l + k) / (
                    2**k * math.factorial(k) * math.factorial(l - k)
                )
            assert d == pytest.approx(expected, rel=1e-12, abs=1e-12)
            assert dn == pytest.approx((-1.0) ** (l + k) * expected, rel=1e-12, abs=1e-12)


def test_parity(rng):
    for _ in range(25):
        l = int(rng.integers(0, 60))
        t = float(rng.uniform(-0.99, 0.99))
        a = legendre_jet(l, t).value
        b = legendre_jet(l, -t).value
        assert b == pytest.approx((-1.0) ** l * a, rel=1e-12, abs=1e-12)


def test_derivatives_match_finite_differences(rng):
    h = 1e-4
    d1_st = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
    d2_st = ((-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0))
    d3_st = ((-3, 1.0), (-2, -8.0), (-1, 13.0), (1, -13.0), (2, 8.0), (3, -1.0))
    for _ in range(100):
        l = int(rng.integers(1, 51))
        t = float(rng.uniform(-0.9, 0.9))
        jet = legendre_jet(l, t, k_max=3)
        val = {k: legendre_jet(l, t + k * h).value for k in range(-3, 4)}
        fd1 = sum(w * val[k] for k, w in d1_st) / (12.0 * h)
        fd2 = sum(w * val[k] for k, w in d2_st) / (12.0 * h * h)
        fd3 = sum(w * val[k] for k, w in d3_st) / (8.0 * h**3)
        assert jet.d1 == pytest.approx(fd1, rel=1e-6, abs=1e-8)
        assert jet.d2 == pytest.approx(fd2, rel=1e-6, abs=1e-6)
        if l >= 3:
            # the 2nd-order d3 stencil is the weak link, not the jet
            assert jet.d3 == pytest.approx(fd3, rel=1e-5, abs=1e-3)
        else:
            assert jet.d3 == 0.0


def test_assoc_orthonormality():
    nodes, weights = np.polynomial.legendre.leggauss(240)
    cases = [(5, 5, 3), (5, 9, 3), (9, 9, 3), (12, 5, 3), (4, 4, 0), (4, 6, 0), (20, 20, 17)]
    for la, lb, m in cases:
        prods = np.array(
            [
                assoc_legendre_jet(la, m, float(t)).value
                * assoc_legendre_jet(lb, m, float(t)).value
                for t in nodes
            ]
        )
        integral = float(prods @ weights)
        assert integral == pytest.approx(1.0 if la == lb else 0.0, abs=1e-10)


def test_zonal_values_are_scaled_legendre():
    norm = math.sqrt(4.5)
    assert assoc_legendre_jet(4, 0, 0.0).value == pytest.approx(norm * 3.0 / 8.0, rel=1e-14)
    for t in (-0.73, 0.11, 0.52):
        assert assoc_legendre_jet(4, 0, t).value == pytest.approx(
            norm * legendre_jet(4, t).value, rel=1e-13
        )


def test_degree_one_is_proportional_to_t():
    c = math.sqrt(1.5)
    for t in (-0.8, 0.0, 0.3, 0.97):
        assert assoc_legendre_jet(1, 0, t).value == pytest.approx(c * t, abs=1e-15)


def test_assoc_matches_product_formula_oracle():
    for l, m, t in ((10, 7, 0.3), (14, 5, -0.62), (12, 12, 0.77), (9, 1, 0.05)):
        value, d1, d2 = rodrigues_assoc_jet(l, m, t)
        jet = assoc_legendre_jet(l, m, t)
        assert jet.value == pytest.approx(value, rel=1e-10, abs=1e-10)
        assert jet.d1 == pytest.approx(d1, rel=1e-9)
        assert jet.d2 == pytest.approx(d2, rel=1e-9)


def test_addition_theorem_closure(rng):
    # sum over the real basis at two points telescopes to the kernel
    for l in (1, 5, 12, 20):
        for _ in range(3):
            tx, ty = rng.uniform(0.0, 2.0 * math.pi, 2)
            px, py = rng.uniform(0.15, math.pi - 0.15, 2)
            h = math.cos(px) * math.cos(py) + math.sin(px) * math.sin(py) * math.cos(
                tx - ty
            )
            total = 0.0
            for m in range(l + 1):
                na = assoc_legendre_jet(l, m, math.cos(px)).value
                nb = assoc_legendre_jet(l, m, math.cos(py)).value
                c = 1.0 / (2.0 * math.pi) if m == 0 else math.cos(m * (tx - ty)) / math.pi
                total += c * na * nb
            target = (2 * l + 1) / (4.0 * math.pi) * legendre_jet(l, h).value
            assert total == pytest.approx(target, abs=1e-9)


def test_table_matches_scalar_jets():
    t = np.array([-0.93, -0.4, 0.02, 0.55, 0.888])
    value, d1, d2 = assoc_legendre_table(30, t)
    for m in range(31):
        for j, tj in enumerate(t):
            jet = assoc_legendre_jet(30, m, float(tj))
            assert value[m, j] == pytest.approx(jet.value, rel=1e-12, abs=1e-13)
            assert d1[m, j] == pytest.approx(jet.d1, rel=1e-12, abs=1e-12)
            assert d2[m, j] == pytest.approx(jet.d2, rel=1e-12, abs=1e-11)


def test_table_first_derivative_only_mode():
    t = np.linspace(-0.9, 0.9, 7)
    full = assoc_legendre_table(17, t, derivatives=2)
    lean = assoc_legendre_table(17, t, derivatives=1)
    assert len(lean) == 2
    np.testing.assert_array_equal(full[0], lean[0])
    np.testing.assert_array_equal(full[1], lean[1])


def test_stability_at_high_degree():
    # values stay finite and normalized out to the contract's l = 200
    nodes, weights = np.polynomial.legendre.leggauss(400)
    value, _, _ = assoc_legendre_table(200, nodes)
    norms = (value * value) @ weights
    assert np.all(np.isfinite(value))
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)


def test_argument_errors():
    with pytest.raises(ArgumentError):
        legendre_jet(-1, 0.5)
    with pytest.raises(ArgumentError):
        legendre_jet(3, 1.5)
    with pytest.raises(ArgumentError):
        legendre_jet(3, 0.5, k_max=4)
    with pytest.raises(ArgumentError):
        assoc_legendre_jet(3, 4, 0.5)
    with pytest.raises(ArgumentError):
        assoc_legendre_jet(3, -1, 0.5)
