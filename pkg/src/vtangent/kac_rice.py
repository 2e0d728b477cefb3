"""First intensity of V-tangent nodal points and its integral.

The points being counted are the simultaneous zeros of (f, Vf). The
counting identity turns their expected number into the integral of a
local density: at each point, condition the pair (Vperp_f, VVf) on
(f, Vf) = 0 via the Schur complement of the 4x4 covariance, take the
exact bivariate absolute moment of the conditioned pair, and divide by
the Gaussian mass factor and ||V||^2. The absolute moment is evaluated
in closed form at every correlation, so no asymptotic expansion enters;
the large-l behavior K_V ~ sqrt(2)/(4 pi^2) l^2 is a test target.

``first_intensity`` reports the density per unit area. The chart
density over d(theta) d(phi) is sin(phi) times larger; ``expected_count``
integrates it over the whole chart, excising a thin neighborhood of the
zeros of V where the conditioning degenerates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .covariance_engine import Cov4, _entries, covariance_closed_form
from .errors import (
    ArgumentError,
    DegenerateConditioningError,
    DegeneratePointError,
    InvalidCovarianceError,
    ResolutionError,
)
from .sphere_geometry import FieldSpec, SpherePoint, field_jet, field_jet_arrays

# Excision exponents admissible for the remainder analysis.
_ALPHA_LO = 5.0 / 54.0
_ALPHA_HI = 1.0 / 3.0

# The excised tube never needs to be wider than this; at small l the
# nominal l^-alpha radius would swallow a fixed fraction of the sphere
# and break agreement with direct counting.
_EXCISION_CAP = 1e-3


@dataclass(frozen=True)
class CondCov2:
    """Covariance of (Vperp_f, VVf) conditioned on (f, Vf) = 0."""

    m11: float
    m12: float
    m22: float

    @cached_property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m12

    @cached_property
    def rho(self) -> float:
        denom = math.sqrt(max(self.m11, 0.0) * max(self.m22, 0.0))
        if denom == 0.0:
            return 0.0
        return max(-1.0, min(1.0, self.m12 / denom))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m12, self.m22]])


@dataclass(frozen=True)
class IntensityValue:
    """Per-unit-area density of tangent nodal points, with diagnostics."""

    point: SpherePoint
    value: float
    det_c11: float
    det_delta: float
    rho: float


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and excision controls for the sphere integral."""

    n_phi: int = 256
    n_theta: int = 256
    excision_alpha: float = 0.2
    excision_policy: str = "exclude"

    def __post_init__(self):
        if self.n_phi < 2 or self.n_theta < 2:
            raise ArgumentError("need at least 2 nodes per direction")
        if not (_ALPHA_LO < self.excision_alpha < _ALPHA_HI):
            raise ArgumentError(
                f"excision_alpha must lie in ({_ALPHA_LO:.4f}, {_ALPHA_HI:.4f}), "
                f"got {self.excision_alpha!r}"
            )
        if self.excision_policy not in ("exclude", "clamp"):
            raise ArgumentError(
                f"excision_policy must be 'exclude' or 'clamp', got {self.excision_policy!r}"
            )


def conditional_covariance(c: Cov4) -> CondCov2:
    """Schur complement of the (f, Vf) block in the 4x4 covariance.

    Computed from the full blocks; with the zero pattern of the closed
    form this collapses to m11 = a33, m12 = a34,
    m22 = a44 - a14^2 - a24^2/a22.
    """
    if c.a22 <= 0.0:
        raise DegenerateConditioningError(
            f"conditioning block is singular: a22 = {c.a22!r}"
        )
    m = c.matrix
    c11 = m[:2, :2]
    c12 = m[:2, 2:]
    c22 = m[2:, 2:]
    try:
        corr = c12.T @ np.linalg.solve(c11, c12)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConditioningError(f"conditioning block not invertible: {exc}")
    delta = c22 - corr
    return CondCov2(
        m11=float(delta[0, 0]),
        m12=float(0.5 * (delta[0, 1] + delta[1, 0])),
        m22=float(delta[1, 1]),
    )


def abs_moment(d: CondCov2) -> float:
    """E|XY| for centered bivariate normal (X, Y) with covariance d.

    Closed form (2/pi) sqrt(m11 m22) (sqrt(1 - rho^2) + rho asin rho),
    exact at every correlation including |rho| = 1.
    """
    tol = 1e-9 * max(d.m11 + d.m22, 1.0)
    if d.m11 < -tol or d.m22 < -tol or d.det < -tol * max(d.m11 + d.m22, 1.0):
        raise InvalidCovarianceError(
            f"not positive semidefinite: m11={d.m11!r} m22={d.m22!r} det={d.det!r}"
        )
    m11 = max(d.m11, 0.0)
    m22 = max(d.m22, 0.0)
    rho = d.rho
    return (
        (2.0 / math.pi)
        * math.sqrt(m11 * m22)
        * (math.sqrt(max(0.0, 1.0 - rho * rho)) + rho * math.asin(rho))
    )


def leading_term(l: int) -> float:
    """Large-l density per unit area, sqrt(2)/(4 pi^2) l^2."""
    return math.sqrt(2.0) / (4.0 * math.pi ** 2) * l * l


def first_intensity(l: int, spec: FieldSpec, p: SpherePoint) -> IntensityValue:
    """Density of tangent nodal points per unit area at p.

    Assembles the Gaussian mass factor 1/(2 pi sqrt(det C11)), the
    1/||V||^2 Jacobian factor, and the exact conditional absolute
    moment; the chart-to-area conversion divides by sin(phi).
    """
    fj = field_jet(spec, p)
    s = math.sin(p.phi)
    vsq = fj.v1 * fj.v1 * s * s + fj.v2 * fj.v2
    if math.sqrt(vsq) < 1e-8:
        raise DegeneratePointError(
            f"field {spec.name!r} vanishes at (theta={p.theta}, phi={p.phi})"
        )
    cov = covariance_closed_form(l, fj, p)
    delta = conditional_covariance(cov)
    det_c11 = cov.a11 * cov.a22 - cov.a12 * cov.a12
    chart = abs_moment(delta) / (2.0 * math.pi * math.sqrt(det_c11) * vsq)
    return IntensityValue(
        point=p,
        value=chart / s,
        det_c11=det_c11,
        det_delta=delta.det,
        rho=delta.rho,
    )


def _abs_moment_grid(m11, m12, m22):
    """Vectorized absolute moment; negative variances clipped at zero."""
    m11 = np.maximum(m11, 0.0)
    m22 = np.maximum(m22, 0.0)
    prod = m11 * m22
    denom = np.sqrt(prod)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(denom > 0.0, m12 / np.where(denom > 0.0, denom, 1.0), 0.0)
    rho = np.clip(rho, -1.0, 1.0)
    return (2.0 / np.pi) * denom * (np.sqrt(np.maximum(0.0, 1.0 - rho * rho)) + rho * np.arcsin(rho))


def _chart_intensity_grid(l, spec, theta, phi, threshold, policy):
    """Chart density over d(theta) d(phi) on the product grid.

    Returns (K, excised_mask) with K zeroed (exclude) or evaluated on the
    norm-rescaled field (clamp) where ||V|| < threshold.
    """
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    v1, v2, dtv1, dpv1, dtv2, dpv2 = field_jet_arrays(spec, th, ph)
    s = np.sin(ph)
    c = np.cos(ph)
    norm = np.sqrt(v1 * v1 * s * s + v2 * v2)
    mask = norm < threshold
    if policy == "clamp":
        # Hold the integrand at its excision-boundary value by scaling the
        # components up to the threshold norm; the derivative entries are
        # kept, matching a field of healthy size with the same geometry.
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(mask, threshold / np.where(norm > 0.0, norm, 1.0), 1.0)
        scale = np.where(norm == 0.0, 0.0, scale)
        v1 = v1 * scale
        v2 = v2 * scale
    a11, a12, a13, a14, a22, a23, a24, a33, a34, a44 = _entries(
        l, v1, v2, dtv1, dpv1, dtv2, dpv2, s, c
    )
    vsq = v1 * v1 * s * s + v2 * v2
    m11 = a33
    m12 = a34
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_a22 = np.where(a22 > 0.0, 1.0 / np.where(a22 > 0.0, a22, 1.0), 0.0)
    m22 = a44 - a14 * a14 - a24 * a24 * inv_a22
    det_c11 = a11 * a22 - a12 * a12
    numer = _abs_moment_grid(m11, m12, m22)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = numer / (2.0 * np.pi * np.sqrt(det_c11) * vsq)
    dead = mask if policy == "exclude" else (norm == 0.0)
    k = np.where(dead, 0.0, k)
    return k, mask


def _quad_once(l, spec, n_phi, n_theta, threshold, policy):
    x, w = np.polynomial.legendre.leggauss(n_phi)
    phi = (x + 1.0) * (np.pi / 2.0)
    w_phi = w * (np.pi / 2.0)
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    k, _ = _chart_intensity_grid(l, spec, theta, phi, threshold, policy)
    # dot then sum keeps the reduction order fixed for bit-identical reruns
    per_theta = k @ w_phi
    return float(np.sum(per_theta) * (2.0 * np.pi / n_theta))


def expected_count(l: int, spec: FieldSpec, q: QuadratureSpec = QuadratureSpec()):
    """Integral of the density over the sphere; returns (value, error).

    Product quadrature, Gauss-Legendre in phi by periodic trapezoid in
    theta, with node doubling until the relative change drops below
    1e-4. The error estimate is the last doubling difference. Raises
    ResolutionError if doubling still moves the value by more than 1%.
    """
    if l < 1:
        raise ArgumentError(f"degree must be >= 1, got {l!r}")
    threshold = min(l ** (-q.excision_alpha), _EXCISION_CAP)
    n_phi, n_theta = q.n_phi, q.n_theta
    prev = _quad_once(l, spec, n_phi, n_theta, threshold, q.excision_policy)
    change = math.inf
    for _ in range(3):
        n_phi *= 2
        n_theta *= 2
        cur = _quad_once(l, spec, n_phi, n_theta, threshold, q.excision_policy)
        change = abs(cur - prev)
        prev = cur
        if change <= 1e-4 * max(abs(cur), 1e-300):
            return cur, change
    if change > 1e-2 * max(abs(prev), 1e-300):
        raise ResolutionError(
            f"quadrature not converged at {n_phi}x{n_theta} nodes: "
            f"last doubling moved the value by {change!r}"
        )
    return prev, change
