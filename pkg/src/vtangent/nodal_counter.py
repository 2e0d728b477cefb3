"""Direct counting of V-tangent nodal points for one sampled harmonic.

The target set is {f = 0, Vf = 0}, almost surely a finite collection of
non-degenerate points. The strategy is dense chart-grid seeding (cells
whose corner values of f or Vf change sign or come close to it) followed
by damped Newton refinement of the 2x2 system and a geodesic merge of
duplicates. Caps around the poles and the declared zeros of V are
excluded: the chart degenerates at the former, the system at the latter.

This route shares the sample evaluation with the analytic one but none
of the covariance machinery, so comparing its trial means against the
integrated intensity checks the whole analytic pipeline end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateSampleError
from .harmonic_ensemble import HarmonicSample, eval_jet2_grid, eval_jet2_many
from .sphere_geometry import (
    FieldSpec,
    SpherePoint,
    field_components,
    field_jet_arrays,
    geodesic_distance,
)

_CAP_RADIUS = 1e-3
# below this colatitude cos(phi) rounds to 1 and the basis tables degenerate
_CHART_EDGE = 1e-7
_RES_TOL = 1e-11
_STEP_TOL = 1e-13
_MAX_ITER = 50
_MAX_HALVINGS = 6


@dataclass(frozen=True)
class TangentPoint:
    """One refined solution of (f, Vf) = 0."""

    location: SpherePoint
    residual: float
    jacobian_det: float


@dataclass(frozen=True)
class CountReport:
    count: int
    points: tuple
    flags: dict


def _jet_arrays(sample: HarmonicSample, spec: FieldSpec, theta, phi):
    """f, Vf, and the Jacobian rows of (f, Vf) at scattered chart points."""
    f, ft, fp, ftt, ftp, fpp = eval_jet2_many(sample, theta, phi)
    v1, v2, dtv1, dpv1, dtv2, dpv2 = field_jet_arrays(spec, theta, phi)
    vf = v1 * ft + v2 * fp
    vf_t = dtv1 * ft + v1 * ftt + dtv2 * fp + v2 * ftp
    vf_p = dpv1 * ft + v1 * ftp + dpv2 * fp + v2 * fpp
    return f, ft, fp, vf, vf_t, vf_p


def newton_refine(sample: HarmonicSample, spec: FieldSpec, start: SpherePoint):
    """Damped Newton for (f, Vf) = 0 from one start.

    Returns a TangentPoint, or None on divergence (chart exit, singular
    Jacobian, or iteration cap). A start already at a root is returned
    unchanged on the first iteration.
    """
    theta = np.array([start.theta])
    phi = np.array([start.phi])
    res = _refine_batch(sample, spec, theta, phi)
    th, ph, r, jd, ok = (a[0] for a in res)
    if not ok:
        return None
    return TangentPoint(
        location=SpherePoint(float(th), float(ph)),
        residual=float(r),
        jacobian_det=float(jd),
    )


def _refine_batch(sample: HarmonicSample, spec: FieldSpec, theta, phi):
    """Vectorized damped Newton over many starts.

    Returns (theta, phi, residual, jacobian_det, converged) arrays.
    """
    theta = np.array(theta, dtype=float)
    phi = np.array(phi, dtype=float)
    n = len(theta)
    residual = np.full(n, np.inf)
    jac_det = np.zeros(n)
    converged = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)

    for _ in range(_MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        th = theta[idx]
        ph = phi[idx]
        f, ft, fp, vf, vf_t, vf_p = _jet_arrays(sample, spec, th, ph)
        res = np.maximum(np.abs(f), np.abs(vf))
        det = ft * vf_p - fp * vf_t

        # Newton step for [[ft, fp], [vf_t, vf_p]] d = -(f, vf)
        with np.errstate(divide="ignore", invalid="ignore"):
            d_th = -(vf_p * f - fp * vf) / det
            d_ph = -(ft * vf - vf_t * f) / det
        step = np.hypot(d_th, d_ph)

        singular = np.abs(det) < 1e-300
        done = (step < _STEP_TOL) & (res < _RES_TOL) & ~singular
        if done.any():
            sel = idx[done]
            converged[sel] = True
            residual[sel] = res[done]
            jac_det[sel] = det[done]
            active[sel] = False
        if singular.any():
            active[idx[singular]] = False
        live = ~done & ~singular
        if not live.any():
            continue

        # oversized steps only ever come from near-singular Jacobians
        clip = np.minimum(1.0, 0.5 / np.maximum(step[live], 1e-300))
        d_th_l = d_th[live] * clip
        d_ph_l = d_ph[live] * clip
        th_l = th[live]
        ph_l = ph[live]
        res_l = res[live]

        alpha = np.ones(len(th_l))
        trial_th = th_l + d_th_l
        trial_ph = ph_l + d_ph_l
        trial_res = _residual_at(sample, spec, trial_th, trial_ph)
        for _ in range(_MAX_HALVINGS):
            worse = trial_res >= res_l
            if not worse.any():
                break
            alpha[worse] *= 0.5
            trial_th[worse] = th_l[worse] + alpha[worse] * d_th_l[worse]
            trial_ph[worse] = ph_l[worse] + alpha[worse] * d_ph_l[worse]
            trial_res[worse] = _residual_at(
                sample, spec, trial_th[worse], trial_ph[worse]
            )

        live_idx = idx[live]
        worse = trial_res >= res_l
        if worse.any():
            # no damping level improved the residual; the next iteration
            # would recompute the same failing step, so the point is dead
            active[live_idx[worse]] = False
        good = ~worse
        good_idx = live_idx[good]
        theta[good_idx] = trial_th[good]
        phi[good_idx] = trial_ph[good]
        exited = (trial_ph[good] <= _CHART_EDGE) | (
            trial_ph[good] >= math.pi - _CHART_EDGE
        )
        if exited.any():
            active[good_idx[exited]] = False

    return theta, phi, residual, jac_det, converged


def _residual_at(sample, spec, theta, phi):
    safe_ph = np.clip(phi, _CHART_EDGE, math.pi - _CHART_EDGE)
    f, ft, fp = eval_jet2_many(sample, theta, safe_ph, order=1)
    v1, v2 = field_components(spec, theta, safe_ph)
    out = np.maximum(np.abs(f), np.abs(v1 * ft + v2 * fp))
    # a trial point that left the chart never counts as an improvement
    out[safe_ph != phi] = np.inf
    return out


def _seed_mask(vals):
    """Corner-range tests on each grid cell of ``vals``.

    ``vals`` has shape (n_theta+1, n_phi+1) with the wrapped theta row
    appended. Returns (strict, expanded): strict is a plain sign-change
    test, expanded widens the corner range by half its span so that
    tangential crossings whose corner values all share a sign still get
    seeded.
    """
    corners = np.stack(
        [vals[:-1, :-1], vals[1:, :-1], vals[:-1, 1:], vals[1:, 1:]]
    )
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    span = hi - lo
    strict = (lo <= 0.0) & (0.0 <= hi)
    expanded = (lo - 0.5 * span <= 0.0) & (0.0 <= hi + 0.5 * span)
    return strict, expanded


def _cell_mean_abs(vals):
    a = np.abs(vals)
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def _band_minima(f, vf, band):
    """Cells that locally minimize a joint residual proxy over ``band``.

    The widened corner test flags a band of cells several cells thick
    around each zero curve of f or Vf; refining every one of them only
    rediscovers the same roots. One start per local basin of
    max(|f|, |Vf|) (corner means, scale-normalized; means are smoother
    than minima across cells and give fewer spurious basins) is enough,
    with the strict crossings seeded unconditionally on top.
    """
    sf = float(np.sqrt(np.mean(f * f))) or 1.0
    svf = float(np.sqrt(np.mean(vf * vf))) or 1.0
    proxy = np.maximum(_cell_mean_abs(f) / sf, _cell_mean_abs(vf) / svf)
    work = np.where(band, proxy, np.inf)
    nt, np_ = work.shape
    padded = np.full((nt + 2, np_ + 2), np.inf)
    padded[1:-1, 1:-1] = work
    padded[0, 1:-1] = work[-1]   # theta wraps; phi borders stay +inf
    padded[-1, 1:-1] = work[0]
    neigh = np.full_like(work, np.inf)
    for di in (0, 1, 2):
        for dj in (0, 1, 2):
            if di == 1 and dj == 1:
                continue
            neigh = np.minimum(neigh, padded[di : di + nt, dj : dj + np_])
    return band & (proxy <= neigh)


def find_tangent_points(
    sample: HarmonicSample, spec: FieldSpec, grid_density: int = 12
) -> CountReport:
    """Seed, refine, merge, and report all tangent nodal points.

    The chart grid has grid_density cells per unit wavelength scale,
    n = grid_density * l + 1 per direction. Newton starts are the cells
    where both f and Vf change sign across the corners, plus the local
    residual minima of the widened corner test (``_band_minima``). More
    than 8 l^2 joint sign-change cells means the solution set is not
    point-like (for instance a zonal sample with the rotation field,
    where Vf vanishes identically) and raises DegenerateSampleError.
    """
    if grid_density < 4:
        raise ArgumentError(f"grid_density must be >= 4, got {grid_density!r}")
    l = sample.l
    n = grid_density * l + 1
    theta_edges = np.linspace(0.0, 2.0 * math.pi, n + 1)  # wrapped final edge
    phi_edges = np.concatenate(
        [[1e-6], np.arange(1, n) * (math.pi / n), [math.pi - 1e-6]]
    )

    f, ft, fp = eval_jet2_grid(sample, theta_edges[:-1], phi_edges, order=1)
    th_grid, ph_grid = np.meshgrid(theta_edges[:-1], phi_edges, indexing="ij")
    v1, v2 = field_components(spec, th_grid, ph_grid)
    vf = v1 * ft + v2 * fp
    f = np.vstack([f, f[0]])
    vf = np.vstack([vf, vf[0]])

    strict_f, wide_f = _seed_mask(f)
    strict_vf, wide_vf = _seed_mask(vf)
    strict = strict_f & strict_vf
    # joint strict crossings measure the actual solution-set mass; the
    # widened seeds are refinement insurance and would overcount here
    n_candidates = int(strict.sum())
    limit = 8 * l * l
    if n_candidates > limit:
        raise DegenerateSampleError(
            f"{n_candidates} joint sign-change cells exceeds {limit}; the "
            "solution set is likely a curve, not isolated points"
        )
    flags = {
        "degenerate_warning": n_candidates > 4 * l * l,
        "excluded_caps": _cap_list(spec),
    }

    seeds = strict | _band_minima(f, vf, wide_f & wide_vf)
    idx_th, idx_ph = np.nonzero(seeds)
    start_th = 0.5 * (theta_edges[idx_th] + theta_edges[idx_th + 1])
    start_ph = 0.5 * (phi_edges[idx_ph] + phi_edges[idx_ph + 1])
    th, ph, res, jac, ok = _refine_batch(sample, spec, start_th, start_ph)

    points = _merge(
        th[ok], ph[ok], res[ok], jac[ok], l, flags["excluded_caps"]
    )
    return CountReport(count=len(points), points=tuple(points), flags=flags)


def _cap_list(spec: FieldSpec):
    caps = [(0.0, 0.0, _CAP_RADIUS), (0.0, math.pi, _CAP_RADIUS)]
    for theta, phi, _order in spec.zeros:
        caps.append((theta, phi, _CAP_RADIUS))
    return tuple(caps)


def _merge(theta, phi, res, jac, l, caps):
    """Greedy duplicate merge at geodesic radius 0.2/l, then cap filter.

    Points are processed sorted by (phi, theta) so the kept set does
    not depend on refinement order.
    """
    radius = 0.2 / l
    order = np.lexsort((theta, phi))
    kept = []
    kept_xyz = np.empty((0, 3))
    cos_r = math.cos(radius)
    for i in order:
        ph_i = float(phi[i])
        th_i = float(theta[i])
        if not (_CAP_RADIUS < ph_i < math.pi - _CAP_RADIUS):
            continue
        p = SpherePoint(th_i, ph_i)
        if any(
            geodesic_distance(p, SpherePoint(ct, cp)) <= cr
            for ct, cp, cr in caps
            if 0.0 < cp < math.pi
        ):
            continue
        s = math.sin(p.phi)
        xyz = np.array([s * math.cos(p.theta), s * math.sin(p.theta), math.cos(p.phi)])
        if len(kept) and np.max(kept_xyz @ xyz) >= cos_r:
            continue
        kept.append(
            TangentPoint(location=p, residual=float(res[i]), jacobian_det=float(jac[i]))
        )
        kept_xyz = np.vstack([kept_xyz, xyz])
    return kept


def count(sample: HarmonicSample, spec: FieldSpec, grid_density: int = 12) -> int:
    """Number of tangent nodal points; see find_tangent_points."""
    return find_tangent_points(sample, spec, grid_density).count
