"""Reproducible Monte Carlo experiments and the ``vtangent`` command line.

``run_mc`` draws independent degree-l samples with counter-based per-trial
seeds, counts tangent nodal points for each, and compares the empirical
mean against the analytic expectation and the leading-order growth law.
Everything emitted is a pure function of the experiment config: per-trial
seeds are derived from the base seed, aggregation folds in trial-index
order regardless of worker count, and the JSON/CSV writers format numbers
themselves (17 significant digits, '.' decimal) so reruns are
byte-identical. Wall-clock time goes to stderr only; the ``runtime_s``
report key is pinned to 0.0 for that reason.

Subcommands: ``mc``, ``count``, ``expect``, ``intensity``, ``verify-cov``.
A ``--config`` file holds ``key = value`` lines and takes precedence over
flags for the keys it names.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .covariance_engine import covariance_closed_form, covariance_fd_oracle
from .errors import (
    ArgumentError,
    DegeneratePointError,
    DegenerateSampleError,
    ExperimentError,
    VTangentError,
)
from .harmonic_ensemble import sample_harmonic, trial_seed
from .kac_rice import QuadratureSpec, expected_count, first_intensity, leading_term
from .nodal_counter import find_tangent_points
from .sphere_geometry import FieldSpec, SpherePoint, field_jet, parse_field

_ENTRY_NAMES = ("a11", "a12", "a13", "a14", "a22", "a23", "a24", "a33", "a34", "a44")
_CONFIG_KEYS = (
    "l",
    "field",
    "trials",
    "base_seed",
    "density",
    "n_phi",
    "n_theta",
    "alpha",
    "policy",
    "output",
    "format",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a Monte Carlo run depends on; the report is a function of this."""

    l: int
    field: FieldSpec
    trials: int
    base_seed: int
    grid_density: int = 12
    quadrature: QuadratureSpec = dataclass_field(default_factory=QuadratureSpec)
    output: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.l < 1:
            raise ArgumentError(f"l must be >= 1, got {self.l!r}")
        if self.trials < 1:
            raise ArgumentError(f"trials must be >= 1, got {self.trials!r}")
        if self.grid_density < 4:
            raise ArgumentError(f"density must be >= 4, got {self.grid_density!r}")
        if self.format not in ("json", "csv"):
            raise ArgumentError(f"format must be json or csv, got {self.format!r}")
        int(self.base_seed)

    def as_dict(self) -> dict:
        return {
            "l": self.l,
            "field": self.field.name,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "density": self.grid_density,
            "n_phi": self.quadrature.n_phi,
            "n_theta": self.quadrature.n_theta,
            "alpha": self.quadrature.excision_alpha,
            "policy": self.quadrature.excision_policy,
            "output": self.output,
            "format": self.format,
        }


@dataclass(frozen=True)
class MCResult:
    """Aggregated Monte Carlo outcome.

    ``per_trial`` holds one count per trial, None where the counter
    declared the sample degenerate; degenerate trials are excluded from
    the mean and the standard error divides by the surviving trials.
    ``z_score`` is None when the standard error vanishes.
    """

    per_trial: tuple
    mean: float
    se: float
    degenerate: int
    kac_rice_value: float
    leading_term: float
    z_score: float | None

    def __post_init__(self):
        if self.mean < 0.0:
            raise ArgumentError("mean count cannot be negative")


def _mc_trial(task):
    """One trial; module-level so worker processes can import it."""
    l, field_text, seed, density = task
    try:
        sample = sample_harmonic(l, seed)
        return find_tangent_points(sample, parse_field(field_text), density).count
    except DegenerateSampleError:
        return None


def mc_seeds(cfg: ExperimentConfig) -> tuple:
    return tuple(trial_seed(cfg.base_seed, i) for i in range(cfg.trials))


def run_mc(cfg: ExperimentConfig, workers: int = 1) -> MCResult:
    """Run the experiment; identical output for any positive ``workers``.

    Raises ExperimentError when every trial is degenerate, or when the
    output path cannot be written (the computed result is attached to
    the exception as ``.result``).
    """
    if workers < 1:
        raise ArgumentError(f"workers must be >= 1, got {workers!r}")
    tasks = [
        (cfg.l, cfg.field.name, seed, cfg.grid_density) for seed in mc_seeds(cfg)
    ]
    if workers == 1:
        counts = [_mc_trial(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_mc_trial, tasks, chunksize=chunk))

    good = [c for c in counts if c is not None]
    degenerate = len(counts) - len(good)
    if not good:
        raise ExperimentError("all trials were degenerate; nothing to average")
    mean = float(np.mean(good))
    se = 0.0
    if len(good) > 1:
        se = float(np.std(good, ddof=1) / math.sqrt(len(good)))
    kr, _ = expected_count(cfg.l, cfg.field, cfg.quadrature)
    z = None if se == 0.0 else (mean - kr) / se
    result = MCResult(
        per_trial=tuple(counts),
        mean=mean,
        se=se,
        degenerate=degenerate,
        kac_rice_value=kr,
        leading_term=leading_term(cfg.l),
        z_score=z,
    )
    if cfg.output is not None:
        text = serialize_result(cfg, result)
        try:
            with open(cfg.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            err = ExperimentError(f"could not write {cfg.output}: {exc}")
            err.result = result
            raise err from exc
    return result


# --- deterministic serialization ---------------------------------------


def _jnum(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v) or math.isinf(v):
        return "null"
    return format(v, ".17g")


def render_json(value, indent: int = 0) -> str:
    """Stable JSON: insertion-ordered keys, 17-significant-digit floats."""
    pad = " " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = ",\n".join(
            f"{pad}  {json.dumps(k)}: {render_json(v, indent + 2)}"
            for k, v in value.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(render_json(v, indent) for v in value) + "]"
    if isinstance(value, str):
        return json.dumps(value)
    return _jnum(value)


def serialize_result(cfg: ExperimentConfig, res: MCResult) -> str:
    if cfg.format == "csv":
        lines = ["trial,seed,count,degenerate"]
        for i, (seed, c) in enumerate(zip(mc_seeds(cfg), res.per_trial)):
            cell = "" if c is None else str(c)
            lines.append(f"{i},{seed},{cell},{int(c is None)}")
        return "\n".join(lines) + "\n"
    report = {
        "config": cfg.as_dict(),
        "per_trial": list(res.per_trial),
        "mean": res.mean,
        "se": res.se,
        "degenerate": res.degenerate,
        "kac_rice_value": res.kac_rice_value,
        "leading_term": res.leading_term,
        "z_score": res.z_score,
        # pinned so identical configs stay byte-identical; wall time is
        # reported on stderr instead
        "runtime_s": 0.0,
    }
    return render_json(report) + "\n"


# --- config file and argument plumbing ----------------------------------


def _parse_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ArgumentError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for ln, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ArgumentError(f"{path}:{ln}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ArgumentError(f"{path}:{ln}: unknown key {key!r}")
        out[key] = value.strip()
    return out


_INT_KEYS = {"l", "trials", "base_seed", "density", "n_phi", "n_theta"}
_FLOAT_KEYS = {"alpha"}


def _apply_config_file(args: argparse.Namespace) -> None:
    """Config-file values take precedence over flags for the keys present."""
    if getattr(args, "config", None) is None:
        return
    overrides = _parse_config_file(args.config)
    for key, text in overrides.items():
        if not hasattr(args, key):
            continue  # key is valid but this subcommand does not use it
        try:
            if key in _INT_KEYS:
                value = int(text)
            elif key in _FLOAT_KEYS:
                value = float(text)
            else:
                value = text
        except ValueError as exc:
            raise ArgumentError(f"config key {key!r}: {exc}") from exc
        setattr(args, key, value)


def _config_line(pairs: dict) -> str:
    return "# config: " + " ".join(f"{k}={v}" for k, v in pairs.items())


def _quadrature_from_args(args) -> QuadratureSpec:
    return QuadratureSpec(
        n_phi=args.n_phi,
        n_theta=args.n_theta,
        excision_alpha=args.alpha,
        excision_policy=args.policy,
    )


# --- subcommand handlers -------------------------------------------------


def _cmd_mc(args) -> int:
    cfg = ExperimentConfig(
        l=args.l,
        field=parse_field(args.field),
        trials=args.trials,
        base_seed=args.base_seed,
        grid_density=args.density,
        quadrature=_quadrature_from_args(args),
        output=args.output,
        format=args.format,
    )
    print(_config_line(cfg.as_dict()))
    print("# seeds: " + " ".join(str(s) for s in mc_seeds(cfg)))
    t0 = time.perf_counter()
    try:
        result = run_mc(cfg, workers=args.workers)
    except ExperimentError as exc:
        partial = getattr(exc, "result", None)
        if partial is None:
            raise
        # the write failed; keep the report on stdout so nothing is lost
        sys.stdout.write(serialize_result(cfg, partial))
        print(str(exc), file=sys.stderr)
        return 1
    print(f"# wall time: {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    if cfg.output is None:
        sys.stdout.write(serialize_result(cfg, result))
    return 0


def _cmd_count(args) -> int:
    spec = parse_field(args.field)
    pairs = {"l": args.l, "field": spec.name, "seed": args.seed, "density": args.density}
    print(_config_line(pairs))
    print(f"# seeds: {args.seed}")
    sample = sample_harmonic(args.l, args.seed)
    report = find_tangent_points(sample, spec, args.density)
    if args.emit_points:
        print(f"# count: {report.count}")
        lines = ["theta,phi,residual,jacobian_det"]
        for pt in report.points:
            lines.append(
                f"{_jnum(pt.location.theta)},{_jnum(pt.location.phi)},"
                f"{_jnum(pt.residual)},{_jnum(pt.jacobian_det)}"
            )
        sys.stdout.write("\n".join(lines) + "\n")
        return 0
    obj = dict(pairs)
    obj["count"] = report.count
    obj["degenerate_warning"] = report.flags["degenerate_warning"]
    sys.stdout.write(render_json(obj) + "\n")
    return 0


def _cmd_expect(args) -> int:
    spec = parse_field(args.field)
    q = _quadrature_from_args(args)
    pairs = {
        "l": args.l,
        "field": spec.name,
        "n_phi": q.n_phi,
        "n_theta": q.n_theta,
        "alpha": q.excision_alpha,
        "policy": q.excision_policy,
    }
    print(_config_line(pairs))
    value, change = expected_count(args.l, spec, q)
    obj = dict(pairs)
    obj["value"] = value
    obj["error_estimate"] = change
    obj["leading_term"] = leading_term(args.l)
    sys.stdout.write(render_json(obj) + "\n")
    return 0


def _cmd_intensity(args) -> int:
    spec = parse_field(args.field)
    if args.grid is not None:
        if args.grid < 1:
            raise ArgumentError(f"--grid must be >= 1, got {args.grid!r}")
        pairs = {"l": args.l, "field": spec.name, "grid": args.grid}
        print(_config_line(pairs))
        lines = ["theta,phi,k,rho,det_delta"]
        for i in range(args.grid):
            phi = math.pi * (i + 0.5) / args.grid
            for j in range(args.grid):
                theta = 2.0 * math.pi * j / args.grid
                try:
                    iv = first_intensity(args.l, spec, SpherePoint(theta, phi))
                    cells = (_jnum(iv.value), _jnum(iv.rho), _jnum(iv.det_delta))
                except DegeneratePointError:
                    cells = ("", "", "")  # node at a zero of V
                lines.append(f"{_jnum(theta)},{_jnum(phi)}," + ",".join(cells))
        sys.stdout.write("\n".join(lines) + "\n")
        return 0
    if args.theta is None or args.phi is None:
        raise ArgumentError("intensity needs --theta and --phi, or --grid N")
    pairs = {"l": args.l, "field": spec.name, "theta": args.theta, "phi": args.phi}
    print(_config_line(pairs))
    iv = first_intensity(args.l, spec, SpherePoint(args.theta, args.phi))
    obj = dict(pairs)
    obj["value"] = iv.value
    obj["det_c11"] = iv.det_c11
    obj["det_delta"] = iv.det_delta
    obj["rho"] = iv.rho
    sys.stdout.write(render_json(obj) + "\n")
    return 0


def _verify_cov_rows(l: int, samples: int, seed: int, step: float):
    """CSV rows comparing closed-form covariance entries with the FD oracle.

    Points are redrawn while ||V|| < 0.3: a nearly vanishing field does
    not break the closed form but drowns the oracle's difference
    quotients in cancellation, which would make the report useless.
    """
    rng = np.random.default_rng(seed)
    names = ("rotation", "zgrad", "tilted")
    rows = []
    for i in range(samples):
        spec = parse_field(names[i % len(names)])
        while True:
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            phi = float(rng.uniform(0.35, math.pi - 0.35))
            p = SpherePoint(theta, phi)
            fj = field_jet(spec, p)
            if math.hypot(fj.v1 * math.sin(phi), fj.v2) >= 0.3:
                break
        closed = covariance_closed_form(l, fj, p)
        oracle = covariance_fd_oracle(l, spec, p, step=step)
        tag = f"{spec.name};theta={theta:.6f};phi={phi:.6f};l={l}"
        for entry in _ENTRY_NAMES:
            c = getattr(closed, entry)
            o = getattr(oracle, entry)
            scale = max(abs(c), abs(o))
            err = abs(c - o) if scale < 1e-6 else abs(c - o) / scale
            rows.append((tag, entry, c, o, err))
    return rows


def _cmd_verify_cov(args) -> int:
    pairs = {"l": args.l, "samples": args.samples, "seed": args.seed, "step": args.step}
    print(_config_line(pairs))
    print(f"# seeds: {args.seed}")
    rows = _verify_cov_rows(args.l, args.samples, args.seed, args.step)
    lines = ["config,entry,closed,oracle,rel_error"]
    for tag, entry, c, o, err in rows:
        lines.append(f"{tag},{entry},{_jnum(c)},{_jnum(o)},{_jnum(err)}")
    text = "\n".join(lines) + "\n"
    if args.output is not None:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    worst = max(r[4] for r in rows) if rows else 0.0
    print(f"# max rel_error: {_jnum(worst)}", file=sys.stderr)
    return 0


# --- parser and dispatch -------------------------------------------------


def _add_quadrature_flags(sub):
    sub.add_argument("--n-phi", dest="n_phi", type=int, default=256)
    sub.add_argument("--n-theta", dest="n_theta", type=int, default=256)
    sub.add_argument("--alpha", type=float, default=0.2)
    sub.add_argument("--policy", choices=("exclude", "clamp"), default="exclude")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vtangent",
        description="Count and predict tangency points of nodal lines "
        "of random spherical harmonics.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    mc = subs.add_parser("mc", help="Monte Carlo experiment over many seeds")
    mc.add_argument("--l", type=int, required=True)
    mc.add_argument("--field", default="rotation")
    mc.add_argument("--trials", type=int, default=100)
    mc.add_argument("--base-seed", dest="base_seed", type=int, default=0)
    mc.add_argument("--density", type=int, default=12)
    _add_quadrature_flags(mc)
    mc.add_argument("--output", default=None)
    mc.add_argument("--format", choices=("json", "csv"), default="json")
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--config", default=None, help="key=value file; overrides flags")
    mc.set_defaults(handler=_cmd_mc)

    cnt = subs.add_parser("count", help="count tangent nodal points of one sample")
    cnt.add_argument("--l", type=int, required=True)
    cnt.add_argument("--seed", type=int, default=0)
    cnt.add_argument("--field", default="rotation")
    cnt.add_argument("--density", type=int, default=12)
    cnt.add_argument("--emit-points", dest="emit_points", action="store_true")
    cnt.add_argument("--config", default=None, help="key=value file; overrides flags")
    cnt.set_defaults(handler=_cmd_count)

    exp = subs.add_parser("expect", help="analytic expected count at degree l")
    exp.add_argument("--l", type=int, required=True)
    exp.add_argument("--field", default="rotation")
    _add_quadrature_flags(exp)
    exp.add_argument("--config", default=None, help="key=value file; overrides flags")
    exp.set_defaults(handler=_cmd_expect)

    inten = subs.add_parser("intensity", help="pointwise tangency density")
    inten.add_argument("--l", type=int, required=True)
    inten.add_argument("--field", default="rotation")
    inten.add_argument("--theta", type=float, default=None)
    inten.add_argument("--phi", type=float, default=None)
    inten.add_argument("--grid", type=int, default=None, help="dump an NxN CSV grid")
    inten.add_argument("--config", default=None, help="key=value file; overrides flags")
    inten.set_defaults(handler=_cmd_intensity)

    ver = subs.add_parser(
        "verify-cov", help="closed-form covariance vs finite differences, CSV"
    )
    ver.add_argument("--l", type=int, required=True)
    ver.add_argument("--samples", type=int, default=20)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--step", type=float, default=5e-4)
    ver.add_argument("--output", default=None)
    ver.add_argument("--config", default=None, help="key=value file; overrides flags")
    ver.set_defaults(handler=_cmd_verify_cov)
    return parser


def cli_dispatch(argv) -> int:
    """Parse argv and run one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    try:
        _apply_config_file(args)
        return args.handler(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (VTangentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return cli_dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
