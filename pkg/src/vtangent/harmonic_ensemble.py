"""Random degree-l spherical harmonics and their 2-jets.

A sample is f = sqrt(4pi/N_l) * sum_k a_k Y_k with i.i.d. standard normal
a_k over the real orthonormal eigenbasis

    Y_0     = N_l0(cos phi) / sqrt(2 pi)
    Y_m^c   = N_lm(cos phi) cos(m theta) / sqrt(pi)      m = 1..l
    Y_m^s   = N_lm(cos phi) sin(m theta) / sqrt(pi)

so that E[f(x) f(y)] = P_l(cos d(x, y)). Coefficients are laid out
[zonal, cos_1, sin_1, cos_2, sin_2, ...]. Sampling is counter-based
(Philox keyed by the seed), so parallel trials need no shared state.

Evaluation is termwise differentiation of the basis: theta-derivatives
bring down factors of m, phi-derivatives chain through t = cos(phi).
Three entry points cover the access patterns: ``eval_jet2`` for one
point, ``eval_jet2_many`` for scattered batches (Newton refinement), and
``eval_jet2_grid`` for product grids, where per-latitude Legendre tables
are cached and the theta dependence becomes a matrix product.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .legendre import assoc_legendre_table, legendre_jet
from .sphere_geometry import FieldJet, SpherePoint, kernel_argument

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class HarmonicSample:
    """Degree, the 2l+1 Gaussian coefficients, and the seed they came from.

    The sqrt(4pi/N_l) normalization is applied at evaluation time; coeffs
    hold the raw standard normal draws.
    """

    l: int
    coeffs: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.coeffs) != 2 * self.l + 1:
            raise ArgumentError(
                f"need 2l+1 = {2 * self.l + 1} coefficients, got {len(self.coeffs)}"
            )


@dataclass(frozen=True)
class Jet2:
    """Value and all chart partials of f through second order at one point."""

    f: float
    f_theta: float
    f_phi: float
    f_theta_theta: float
    f_theta_phi: float
    f_phi_phi: float


def trial_seed(base_seed: int, index: int) -> int:
    """Per-trial seed: one splitmix64 round keyed by (base_seed, index)."""
    z = (base_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def sample_harmonic(l: int, seed: int) -> HarmonicSample:
    """Draw the 2l+1 coefficients from Philox keyed by ``seed``.

    Identical (l, seed) gives bit-identical output, independent of how
    many samples any other generator produced.
    """
    if l < 1:
        raise ArgumentError(f"degree must be >= 1, got {l!r}")
    gen = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    coeffs = gen.standard_normal(2 * l + 1)
    coeffs.flags.writeable = False
    return HarmonicSample(l=l, coeffs=coeffs, seed=seed & _MASK64)


def _weights(sample: HarmonicSample):
    """Per-order cosine/sine weights alpha_m, beta_m including normalization."""
    l = sample.l
    scale = math.sqrt(4.0 * math.pi / (2 * l + 1))
    alpha = np.zeros(l + 1)
    beta = np.zeros(l + 1)
    alpha[0] = sample.coeffs[0] * scale / math.sqrt(2.0 * math.pi)
    c = scale / math.sqrt(math.pi)
    if l >= 1:
        alpha[1:] = sample.coeffs[1::2] * c
        beta[1:] = sample.coeffs[2::2] * c
    return alpha, beta


def eval_jet2_many(
    sample: HarmonicSample, theta: np.ndarray, phi: np.ndarray, order: int = 2
):
    """2-jets at scattered points; six arrays of shape like ``theta``.

    Order: (f, f_theta, f_phi, f_theta_theta, f_theta_phi, f_phi_phi).
    With ``order=1`` only the first three are computed and returned,
    skipping the second-derivative Legendre tower; residual-only
    evaluations inside Newton line searches use that path.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    l = sample.l
    t = np.cos(phi)
    s = np.sin(phi)
    tables = assoc_legendre_table(l, t, derivatives=order)
    V, D1 = tables[0], tables[1]
    # d/dphi via t = cos phi, d2/dphi2 = sin^2 D2 - cos D1
    Vp = -s[None, :] * D1

    alpha, beta = _weights(sample)
    m = np.arange(l + 1, dtype=float)
    ang = m[:, None] * theta[None, :]
    cosang = np.cos(ang)
    sinang = np.sin(ang)
    M = alpha[:, None] * cosang + beta[:, None] * sinang
    M1 = m[:, None] * (-alpha[:, None] * sinang + beta[:, None] * cosang)

    f = np.einsum("mi,mi->i", M, V)
    f_t = np.einsum("mi,mi->i", M1, V)
    f_p = np.einsum("mi,mi->i", M, Vp)
    if order == 1:
        return f, f_t, f_p
    Vpp = (s * s)[None, :] * tables[2] - t[None, :] * D1
    M2 = -(m * m)[:, None] * M
    f_tt = np.einsum("mi,mi->i", M2, V)
    f_tp = np.einsum("mi,mi->i", M1, Vp)
    f_pp = np.einsum("mi,mi->i", M, Vpp)
    return f, f_t, f_p, f_tt, f_tp, f_pp


def eval_jet2(sample: HarmonicSample, p: SpherePoint) -> Jet2:
    """Full 2-jet of the sample at one chart point."""
    parts = eval_jet2_many(sample, np.array([p.theta]), np.array([p.phi]))
    return Jet2(*(float(x[0]) for x in parts))


# Latitude tables and theta harmonics are sample-independent; Monte Carlo
# reuses one grid across thousands of trials, so keep the last few.
_GRID_CACHE: dict = {}
_GRID_CACHE_MAX = 6


def _grid_tables(l: int, theta: np.ndarray, phi: np.ndarray):
    key = (l, theta.tobytes(), phi.tobytes())
    hit = _GRID_CACHE.get(key)
    if hit is not None:
        return hit
    t = np.cos(phi)
    s = np.sin(phi)
    V, D1, D2 = assoc_legendre_table(l, t)
    Vp = -s[None, :] * D1
    Vpp = (s * s)[None, :] * D2 - t[None, :] * D1
    m = np.arange(l + 1, dtype=float)
    ang = theta[:, None] * m[None, :]
    cosang = np.cos(ang)  # (n_theta, l+1)
    sinang = np.sin(ang)
    entry = (V, Vp, Vpp, cosang, sinang, m)
    if len(_GRID_CACHE) >= _GRID_CACHE_MAX:
        _GRID_CACHE.pop(next(iter(_GRID_CACHE)))
    _GRID_CACHE[key] = entry
    return entry


def eval_jet2_grid(
    sample: HarmonicSample, theta: np.ndarray, phi: np.ndarray, order: int = 2
):
    """2-jets on the product grid theta x phi.

    Returns six arrays of shape (len(theta), len(phi)) in the same order
    as ``eval_jet2_many``, or just (f, f_theta, f_phi) for ``order=1``.
    Cost per call is one matrix product per returned array; the latitude
    tables are cached across samples of the same degree.
    """
    theta = np.ascontiguousarray(theta, dtype=float)
    phi = np.ascontiguousarray(phi, dtype=float)
    V, Vp, Vpp, cosang, sinang, m = _grid_tables(sample.l, theta, phi)
    alpha, beta = _weights(sample)
    Mc = cosang * alpha[None, :]      # (n_theta, l+1)
    Ms = sinang * beta[None, :]
    M = Mc + Ms
    M1 = (sinang * (-alpha)[None, :] + cosang * beta[None, :]) * m[None, :]
    if order == 1:
        return (M @ V, M1 @ V, M @ Vp)
    M2 = -M * (m * m)[None, :]
    return (M @ V, M1 @ V, M @ Vp, M2 @ V, M1 @ Vp, M @ Vpp)


def kernel(l: int, x: SpherePoint, y: SpherePoint) -> float:
    """Covariance E[f(x) f(y)] = P_l of the kernel argument."""
    return legendre_jet(l, kernel_argument(x, y), 0).value


def directional_values(j: Jet2, fj: FieldJet, p: SpherePoint):
    """(Vf, Vperp_f, VVf) from a 2-jet and a field jet at the same point.

    VVf expands V(Vf) by the product rule, so the first partials of the
    field components enter alongside the second partials of f.
    """
    s = math.sin(p.phi)
    vf = fj.v1 * j.f_theta + fj.v2 * j.f_phi
    wf = fj.v2 * j.f_theta - s * s * fj.v1 * j.f_phi
    d_theta_vf = (
        fj.d_theta_v1 * j.f_theta
        + fj.v1 * j.f_theta_theta
        + fj.d_theta_v2 * j.f_phi
        + fj.v2 * j.f_theta_phi
    )
    d_phi_vf = (
        fj.d_phi_v1 * j.f_theta
        + fj.v1 * j.f_theta_phi
        + fj.d_phi_v2 * j.f_phi
        + fj.v2 * j.f_phi_phi
    )
    vvf = fj.v1 * d_theta_vf + fj.v2 * d_phi_vf
    return vf, wf, vvf


# --- coefficient archive ------------------------------------------------

_HEADER = struct.Struct("<qQ")


def save_sample(sample: HarmonicSample, path) -> None:
    """Dump (l, seed, coefficients) as little-endian binary."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(sample.l, sample.seed))
        fh.write(np.ascontiguousarray(sample.coeffs, dtype="<f8").tobytes())


def load_sample(path) -> HarmonicSample:
    with open(path, "rb") as fh:
        l, seed = _HEADER.unpack(fh.read(_HEADER.size))
        coeffs = np.frombuffer(fh.read(8 * (2 * l + 1)), dtype="<f8").copy()
    if len(coeffs) != 2 * l + 1:
        raise ArgumentError(f"truncated coefficient archive at {path!r}")
    coeffs.flags.writeable = False
    return HarmonicSample(l=l, coeffs=coeffs, seed=seed)
