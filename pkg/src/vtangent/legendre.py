"""Legendre polynomials and orthonormalized associated Legendre functions.

Everything here is recurrence-based. ``legendre_jet`` carries P_l and its
t-derivatives through third order, obtained by differentiating the
three-term recurrence degree by degree. ``assoc_legendre_jet`` evaluates
the L2([-1,1])-orthonormalized associated functions

    N_lm(t) = sqrt((2l+1)/2 * (l-m)!/(l+m)!) * P_l^m(t)

(no Condon-Shortley sign) together with first and second t-derivatives,
using scaled m-then-l recurrences so nothing overflows at degree a few
hundred. ``assoc_legendre_table`` is the vectorized variant used for grid
and batch evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

# Closed forms replace the recurrence this close to the endpoints, where
# the derivative tower loses digits to cancellation.
_ENDPOINT_BAND = 1e-9


@dataclass(frozen=True)
class LegendreJet:
    """P_l(t) and derivatives d^k/dt^k P_l(t) for k up to k_max <= 3."""

    l: int
    t: float
    values: tuple[float, ...]

    @property
    def value(self) -> float:
        return self.values[0]

    @property
    def d1(self) -> float:
        return self.values[1]

    @property
    def d2(self) -> float:
        return self.values[2]

    @property
    def d3(self) -> float:
        return self.values[3]


@dataclass(frozen=True)
class AssocLegendreJet:
    """Orthonormalized associated Legendre factor with d/dt and d2/dt2."""

    l: int
    m: int
    t: float
    value: float
    d1: float
    d2: float


def _endpoint_derivative(l: int, k: int, at_minus_one: bool) -> float:
    """d^k/dt^k P_l at t = +-1: (l+k)! / (2^k k! (l-k)!), with parity sign."""
    if k > l:
        return 0.0
    val = math.perm(l + k, 2 * k) / (2.0**k * math.factorial(k))
    if at_minus_one and (l + k) % 2 == 1:
        val = -val
    return val


def legendre_jet(l: int, t: float, k_max: int = 3) -> LegendreJet:
    """Evaluate P_l(t) and t-derivatives up to order ``k_max``.

    The derivative tower rides the standard three-term recurrence

        n P_n^(k) = (2n-1) (t P_{n-1}^(k) + k P_{n-1}^(k-1)) - (n-1) P_{n-2}^(k),

    one degree at a time, so the cost is O(l) and the accuracy is uniform
    in l away from the endpoints. Within 1e-9 of t = +-1 the exact
    endpoint values are substituted instead.
    """
    if l < 0 or not isinstance(l, (int, np.integer)):
        raise ArgumentError(f"degree must be a non-negative integer, got {l!r}")
    if not 0 <= k_max <= 3:
        raise ArgumentError(f"k_max must be in [0, 3], got {k_max!r}")
    t = float(t)
    if not abs(t) <= 1.0:
        raise ArgumentError(f"argument must satisfy |t| <= 1, got {t!r}")

    if abs(t) >= 1.0 - _ENDPOINT_BAND:
        minus = t < 0
        vals = tuple(_endpoint_derivative(l, k, minus) for k in range(k_max + 1))
        return LegendreJet(l, t, vals)

    prev = [1.0, 0.0, 0.0, 0.0]  # P_0 jet
    if l == 0:
        return LegendreJet(l, t, tuple(prev[: k_max + 1]))
    curr = [t, 1.0, 0.0, 0.0]  # P_1 jet
    for n in range(2, l + 1):
        a = (2 * n - 1) / n
        b = (n - 1) / n
        nxt = [
            a * t * curr[0] - b * prev[0],
            a * (t * curr[1] + curr[0]) - b * prev[1],
            a * (t * curr[2] + 2 * curr[1]) - b * prev[2],
            a * (t * curr[3] + 3 * curr[2]) - b * prev[3],
        ]
        prev, curr = curr, nxt
    return LegendreJet(l, t, tuple(curr[: k_max + 1]))


def _diag_jet(m: int, t: np.ndarray, u: np.ndarray):
    """Jet of N_mm. Log-space magnitude so l ~ 200 cannot overflow."""
    if m == 0:
        v = np.full_like(t, 1.0 / math.sqrt(2.0))
        z = np.zeros_like(t)
        return v, z, z
    log_c = (
        0.5 * (math.log(2 * m + 1) - math.log(2.0))
        + 0.5 * math.lgamma(2 * m + 1)
        - m * math.log(2.0)
        - math.lgamma(m + 1)
    )
    value = np.exp(log_c + m * np.log(u))
    u2 = u * u
    d1 = value * (-m * t / u2)
    d2 = value * (-m / u2 + (m * (m - 2)) * t * t / (u2 * u2))
    return value, d1, d2


def _ascend(l: int, m: int, t: np.ndarray, u: np.ndarray):
    """Jet of N_lm by the scaled l-recurrence starting from the diagonal."""
    v0, d10, d20 = _diag_jet(m, t, u)
    if l == m:
        return v0, d10, d20
    a0 = math.sqrt(2 * m + 3)
    v1 = a0 * t * v0
    d11 = a0 * (v0 + t * d10)
    d21 = a0 * (2.0 * d10 + t * d20)
    for n in range(m + 2, l + 1):
        a = math.sqrt((4 * n * n - 1) / (n * n - m * m))
        b = math.sqrt(
            (2 * n + 1) * (n + m - 1) * (n - m - 1) / ((2 * n - 3) * (n + m) * (n - m))
        )
        v2 = a * t * v1 - b * v0
        d12 = a * (v1 + t * d11) - b * d10
        d22 = a * (2.0 * d11 + t * d21) - b * d20
        v0, d10, d20 = v1, d11, d21
        v1, d11, d21 = v2, d12, d22
    return v1, d11, d21


def assoc_legendre_jet(l: int, m: int, t: float) -> AssocLegendreJet:
    """Orthonormalized N_lm(t) with first and second t-derivatives.

    Requires 0 <= m <= l and t strictly inside (-1, 1); the poles are not
    part of the coordinate chart and the m >= 1 derivatives blow up there.
    """
    if not 0 <= m <= l:
        raise ArgumentError(f"need 0 <= m <= l, got m={m!r}, l={l!r}")
    t = float(t)
    if not abs(t) < 1.0:
        raise ArgumentError(f"argument must satisfy |t| < 1, got {t!r}")
    ta = np.array([t])
    ua = np.sqrt(1.0 - ta * ta)
    v, d1, d2 = _ascend(l, m, ta, ua)
    return AssocLegendreJet(l, m, t, float(v[0]), float(d1[0]), float(d2[0]))


def _degree_coeffs(l: int):
    """Recurrence coefficients a[n, m], b[n, m], zeroed where unused."""
    n = np.arange(l + 1, dtype=float)[:, None]
    m = np.arange(l + 1, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
        b = np.sqrt(
            (2.0 * n + 1.0)
            * (n + m - 1.0)
            * (n - m - 1.0)
            / ((2.0 * n - 3.0) * (n + m) * (n - m))
        )
    a = np.where(m < n, a, 0.0)
    b = np.where(m <= n - 2.0, b, 0.0)
    return a, b


def assoc_legendre_table(l: int, t: np.ndarray, derivatives: int = 2):
    """All orders m = 0..l of N_lm and its first ``derivatives`` t-derivatives.

    Returns a tuple of derivatives+1 arrays, each of shape (l+1, len(t)).
    Same recurrences as ``_ascend`` but swept degree by degree with all
    orders updated at once, so the Python-level loop count is O(l), not
    O(l^2). This is the workhorse for gridded and batched evaluation.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 1:
        raise ArgumentError("t must be one-dimensional")
    if t.size and not np.all(np.abs(t) < 1.0):
        raise ArgumentError("all arguments must satisfy |t| < 1")
    if derivatives not in (1, 2):
        raise ArgumentError(f"derivatives must be 1 or 2, got {derivatives!r}")
    u = np.sqrt(1.0 - t * t)
    npts = t.size
    shape = (l + 1, npts)

    v_pp, v_p = np.zeros(shape), np.zeros(shape)
    d1_pp, d1_p = np.zeros(shape), np.zeros(shape)
    d2_pp, d2_p = np.zeros(shape), np.zeros(shape)
    v_p[0], d1_p[0], d2_p[0] = _diag_jet(0, t, u)
    if l == 0:
        return (v_p, d1_p, d2_p)[: derivatives + 1]

    a, b = _degree_coeffs(l)
    v_c = np.zeros(shape)
    d1_c = np.zeros(shape)
    d2_c = np.zeros(shape)
    # diagonal N_mm carried as a running product, N_nn = N_{n-1,n-1} u sqrt((2n+1)/2n)
    diag = np.full(npts, 1.0 / math.sqrt(2.0))
    inv_u2 = 1.0 / (u * u)
    t_inv_u2 = t * inv_u2
    for deg in range(1, l + 1):
        an = a[deg, :deg, None]
        bn = b[deg, :deg, None]
        v_c[:deg] = an * (t * v_p[:deg]) - bn * v_pp[:deg]
        d1_c[:deg] = an * (v_p[:deg] + t * d1_p[:deg]) - bn * d1_pp[:deg]
        if derivatives == 2:
            d2_c[:deg] = an * (2.0 * d1_p[:deg] + t * d2_p[:deg]) - bn * d2_pp[:deg]
        diag = diag * u * math.sqrt((2.0 * deg + 1.0) / (2.0 * deg))
        v_c[deg] = diag
        d1_c[deg] = diag * (-deg) * t_inv_u2
        d2_c[deg] = diag * (-deg * inv_u2 + (deg * (deg - 2)) * t_inv_u2 * t_inv_u2)
        v_pp, v_p, v_c = v_p, v_c, v_pp
        d1_pp, d1_p, d1_c = d1_p, d1_c, d1_pp
        d2_pp, d2_p, d2_c = d2_p, d2_c, d2_pp
    return (v_p, d1_p, d2_p)[: derivatives + 1]
