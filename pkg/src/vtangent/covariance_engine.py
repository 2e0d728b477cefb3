"""Covariance of the Gaussian 4-vector (f, Vf, Vperp_f, VVf) at a point.

Every entry is a mixed directional derivative of the two-point kernel
P_l(cos d(x, y)) evaluated on the diagonal x = y, so each is a polynomial
in the field components, their first partials, sin(phi), cos(phi), and
the two kernel moments

    P1 = P_l'(1)  = l(l+1)/2
    P2 = P_l''(1) = (l+2)(l+1)l(l-1)/8.

``covariance_closed_form`` assembles the evaluated entries; the three
field-dependent coefficient sums live in ``tilde_coeffs``. An
independent check is ``covariance_fd_oracle``, which never sees the
closed forms: it applies the directional operators to the kernel by
nested fourth-order finite differences, with the field components read
off at each shifted evaluation point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegeneratePointError
from .sphere_geometry import (
    FieldJet,
    FieldSpec,
    SpherePoint,
    field_components,
    field_jet,
)


@dataclass(frozen=True)
class TildeCoeffs:
    """Field-dependent scalar coefficients of the P1-proportional parts
    of the (2,4), (3,4) and (4,4) covariance entries."""

    a24_tilde: float
    a34_tilde: float
    a44_1_tilde: float


@dataclass(frozen=True)
class Cov4:
    """Symmetric covariance of (f, Vf, Vperp_f, VVf), rows in that order."""

    l: int
    point: SpherePoint
    field: str
    a11: float
    a12: float
    a13: float
    a14: float
    a22: float
    a23: float
    a24: float
    a33: float
    a34: float
    a44: float

    @property
    def matrix(self) -> np.ndarray:
        m = np.array(
            [
                [self.a11, self.a12, self.a13, self.a14],
                [self.a12, self.a22, self.a23, self.a24],
                [self.a13, self.a23, self.a33, self.a34],
                [self.a14, self.a24, self.a34, self.a44],
            ]
        )
        return m


def kernel_moment_1(l: int) -> float:
    """P_l'(1) = l(l+1)/2."""
    return l * (l + 1) / 2.0


def kernel_moment_2(l: int) -> float:
    """P_l''(1) = (l+2)(l+1)l(l-1)/8."""
    return (l + 2) * (l + 1) * l * (l - 1) / 8.0


def _tilde_sums(v1, v2, dtv1, dpv1, dtv2, dpv2, s, c):
    """The three coefficient sums, elementwise over scalars or arrays.

    Terms are kept in the collected-multiplicity form; the factored
    equivalents live in the test oracle so the two transcriptions check
    each other.
    """
    t24 = (
        v1 * v1 * dtv1 * s * s
        + v1 * dpv1 * v2 * s * s
        + v1 * v1 * v2 * s * c
        + v1 * v2 * dtv2
        + v2 * v2 * dpv2
    )
    t34 = (
        v2 * v1 * dtv1 * s * s
        + 2.0 * v2 * v2 * v1 * s * c
        + v2 * v2 * dpv1 * s * s
        + v1 ** 3 * c * s ** 3
        - v1 * v1 * dtv2 * s * s
        - v1 * v2 * dpv2 * s * s
    )
    t44 = (
        (v1 * dtv1) ** 2 * s * s
        + v1 ** 4 * s * s
        - 2.0 * v1 ** 3 * dtv2 * s * c
        + 4.0 * v1 * v1 * dtv1 * v2 * s * c
        + 2.0 * v1 * dtv1 * dpv1 * v2 * s * s
        - 2.0 * v1 * v1 * v2 * dpv2 * s * c
        + 2.0 * v1 * v1 * v2 * v2 * s * s
        + v1 * v1 * dtv2 * dtv2
        + 4.0 * v1 * v1 * v2 * v2 * c * c
        + 4.0 * v1 * dpv1 * v2 * v2 * c * s
        + 2.0 * v1 * v2 * dtv2 * dpv2
        + dpv1 * dpv1 * v2 * v2 * s * s
        + dpv2 * dpv2 * v2 * v2
        + v2 ** 4
    )
    return t24, t34, t44


def tilde_coeffs(fj: FieldJet, p: SpherePoint) -> TildeCoeffs:
    """Evaluate the three coefficient sums from a field jet at a point."""
    s = math.sin(p.phi)
    c = math.cos(p.phi)
    t24, t34, t44 = _tilde_sums(
        fj.v1, fj.v2, fj.d_theta_v1, fj.d_phi_v1, fj.d_theta_v2, fj.d_phi_v2, s, c
    )
    return TildeCoeffs(a24_tilde=t24, a34_tilde=t34, a44_1_tilde=t44)


_A44_FORMS = ("grouped", "polynomial")


def _entries(l, v1, v2, dtv1, dpv1, dtv2, dpv2, s, c, a44_form="grouped"):
    """All ten distinct entries, elementwise over scalars or arrays.

    Returns (a11, a12, a13, a14, a22, a23, a24, a33, a34, a44).
    """
    if a44_form not in _A44_FORMS:
        raise ArgumentError(f"a44_form must be one of {_A44_FORMS}, got {a44_form!r}")
    p1 = kernel_moment_1(l)
    p2 = kernel_moment_2(l)
    vsq = v1 * v1 * s * s + v2 * v2
    t24, t34, t44 = _tilde_sums(v1, v2, dtv1, dpv1, dtv2, dpv2, s, c)
    a11 = v1 * 0.0 + 1.0
    zero = v1 * 0.0
    a14 = -vsq * p1
    a22 = vsq * p1
    a33 = vsq * s * s * p1
    a24 = t24 * p1
    a34 = t34 * p1
    if a44_form == "grouped":
        a44 = 3.0 * p2 * vsq * vsq + t44 * p1
    else:
        # Expanded polynomial-in-l variant: drops the -(3/8)||V||^4 piece
        # of the l^2 coefficient relative to the grouped form. Kept for
        # documentation; the finite-difference oracle matches "grouped".
        a44 = (
            (3.0 / 8.0) * vsq * vsq * l ** 4
            + (6.0 / 8.0) * vsq * vsq * l ** 3
            + 0.5 * t44 * l ** 2
            + (0.5 * t44 - (3.0 / 8.0) * vsq * vsq) * l
        )
    return a11, zero, zero, a14, a22, zero, a24, a33, a34, a44


def covariance_closed_form(
    l: int, fj: FieldJet, p: SpherePoint, a44_form: str = "grouped"
) -> Cov4:
    """Assemble the covariance from the evaluated entry formulas.

    ``a44_form`` selects between the default "grouped" (4,4) entry,
    3 P2 ||V||^4 + a44_1_tilde P1, and the expanded "polynomial" variant
    retained for documentation (see ``_entries``).
    """
    if l < 1:
        raise ArgumentError(f"degree must be >= 1, got {l!r}")
    s = math.sin(p.phi)
    c = math.cos(p.phi)
    vals = _entries(
        l,
        fj.v1,
        fj.v2,
        fj.d_theta_v1,
        fj.d_phi_v1,
        fj.d_theta_v2,
        fj.d_phi_v2,
        s,
        c,
        a44_form,
    )
    a11, a12, a13, a14, a22, a23, a24, a33, a34, a44 = (float(x) for x in vals)
    return Cov4(
        l=l,
        point=p,
        field="fieldjet",
        a11=a11,
        a12=a12,
        a13=a13,
        a14=a14,
        a22=a22,
        a23=a23,
        a24=a24,
        a33=a33,
        a34=a34,
        a44=a44,
    )


# --- finite-difference oracle --------------------------------------------

# 4th-order central first derivative: offsets and weights, divided by step.
_STENCIL = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


def _kernel_fn(l: int):
    # Extended precision throughout: the order-4 entry divides by step^4,
    # so double-rounding of the kernel alone would cost ~1e-4 absolute.
    one = np.longdouble(1.0)

    def k(q):
        th_x, ph_x, th_y, ph_y = q
        t = np.cos(ph_x) * np.cos(ph_y) + np.sin(ph_x) * np.sin(ph_y) * np.cos(
            th_x - th_y
        )
        if t > one:
            t = one
        elif t < -one:
            t = -one
        pm, p = one, t
        for n in range(2, l + 1):
            pm, p = p, ((2 * n - 1) * t * p - (n - 1) * pm) / n
        return p

    return k


def _field_comp_fn(spec: FieldSpec, perp: bool):
    def comp(theta, phi):
        v1, v2 = field_components(spec, theta, phi)
        if perp:
            s = np.sin(phi)
            return v2, -s * s * v1
        return v1, v2

    return comp


def _apply_directional(g, slot: int, comp, h: float):
    """One directional-derivative application in the x (slot 0) or y
    (slot 1) argument, components evaluated at the shifted point."""

    def out(q):
        theta = q[2 * slot]
        phi = q[2 * slot + 1]
        c1, c2 = comp(theta, phi)
        acc = 0.0
        for axis, coeff in ((0, c1), (1, c2)):
            i = 2 * slot + axis
            tot = 0.0
            for off, w in _STENCIL:
                qq = list(q)
                qq[i] += off * h
                tot += w * g(tuple(qq))
            acc += coeff * tot / h
        return acc

    return out


def covariance_fd_oracle(
    l: int, spec: FieldSpec, p: SpherePoint, step: float = 5e-4
) -> Cov4:
    """Covariance entries by operator composition on the kernel.

    Each entry is the matching product of directional operators in the
    two slots applied to P_l(cos d(x, y)), each application realized as
    two univariate 4th-order stencils weighted by the field components
    at the point being differentiated, the whole evaluated at x = y = p.
    Shares no code path with the closed forms.
    """
    if not (1e-5 <= step <= 1e-3):
        raise ArgumentError(f"step must lie in [1e-5, 1e-3], got {step!r}")
    if l < 1:
        raise ArgumentError(f"degree must be >= 1, got {l!r}")
    step = np.longdouble(step)
    k = _kernel_fn(l)
    v = _field_comp_fn(spec, perp=False)
    w = _field_comp_fn(spec, perp=True)
    q0 = tuple(np.longdouble(x) for x in (p.theta, p.phi, p.theta, p.phi))

    def vx(g):
        return _apply_directional(g, 0, v, step)

    def wx(g):
        return _apply_directional(g, 0, w, step)

    def vy(g):
        return _apply_directional(g, 1, v, step)

    def wy(g):
        return _apply_directional(g, 1, w, step)

    vy_k = vy(k)
    vyvy_k = vy(vy_k)
    return Cov4(
        l=l,
        point=p,
        field=spec.name,
        a11=float(k(q0)),
        a12=float(vy_k(q0)),
        a13=float(wy(k)(q0)),
        a14=float(vyvy_k(q0)),
        a22=float(vx(vy_k)(q0)),
        a23=float(vx(wy(k))(q0)),
        a24=float(vx(vyvy_k)(q0)),
        a33=float(wx(wy(k))(q0)),
        a34=float(wx(vyvy_k)(q0)),
        a44=float(vx(vx(vyvy_k))(q0)),
    )


def nondegeneracy_check(l: int, spec: FieldSpec, p: SpherePoint):
    """Positivity of det C11 and of the conditional-covariance determinant.

    Returns (ok, margin) where margin is the smaller of the two
    determinants, each divided by its large-l leading term, so that a
    healthy configuration gives margin = 1 + O(1/l). Raises
    DegeneratePointError at a zero of the field.
    """
    fj = field_jet(spec, p)
    s = math.sin(p.phi)
    vsq = fj.v1 * fj.v1 * s * s + fj.v2 * fj.v2
    if math.sqrt(vsq) < 1e-8:
        raise DegeneratePointError(
            f"field {spec.name!r} vanishes at (theta={p.theta}, phi={p.phi})"
        )
    cov = covariance_closed_form(l, fj, p)
    det_c11 = cov.a11 * cov.a22 - cov.a12 * cov.a12
    # Schur complement of the (f, Vf) block; a12 = a13 = a23 = 0 collapses
    # it to a rank-one correction of the (4,4) entry.
    m22 = cov.a44 - cov.a14 * cov.a14 - cov.a24 * cov.a24 / cov.a22
    det_delta = cov.a33 * m22 - cov.a34 * cov.a34
    scale_c11 = vsq * l * (l + 1) / 2.0
    scale_delta = vsq ** 3 * s * s * l ** 6 / 16.0
    margin = min(det_c11 / scale_c11, det_delta / scale_delta)
    ok = det_c11 > 0.0 and det_delta > 0.0
    return ok, margin
