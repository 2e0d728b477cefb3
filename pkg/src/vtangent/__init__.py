"""Tangencies of a vector field along nodal lines of random spherical harmonics.

The package computes, at a fixed eigenvalue degree l, the expected number
of points where a nodal line of a Gaussian random spherical harmonic is
tangent to a given tangent vector field V on the sphere, two independent
ways: a closed-form first-intensity integral built from the exact
covariances of (f, Vf, V-perp f, VVf), and direct Monte Carlo root
counting on sampled harmonics. The ``vtangent`` CLI wraps both routes.
"""

from .covariance_engine import (
    Cov4,
    TildeCoeffs,
    covariance_closed_form,
    covariance_fd_oracle,
    nondegeneracy_check,
    tilde_coeffs,
)
from .errors import (
    ArgumentError,
    DegenerateConditioningError,
    DegeneratePointError,
    DegenerateSampleError,
    ExperimentError,
    FieldEvaluationError,
    InvalidCovarianceError,
    ResolutionError,
    VTangentError,
)
from .experiment_cli import ExperimentConfig, MCResult, cli_dispatch, main, run_mc
from .harmonic_ensemble import (
    HarmonicSample,
    Jet2,
    eval_jet2,
    eval_jet2_grid,
    eval_jet2_many,
    kernel,
    load_sample,
    sample_harmonic,
    save_sample,
    trial_seed,
)
from .kac_rice import (
    CondCov2,
    IntensityValue,
    QuadratureSpec,
    abs_moment,
    conditional_covariance,
    expected_count,
    first_intensity,
    leading_term,
)
from .legendre import (
    AssocLegendreJet,
    LegendreJet,
    assoc_legendre_jet,
    assoc_legendre_table,
    legendre_jet,
)
from .nodal_counter import (
    CountReport,
    TangentPoint,
    count,
    find_tangent_points,
    newton_refine,
)
from .sphere_geometry import (
    FieldJet,
    FieldSpec,
    SpherePoint,
    field_jet,
    geodesic_distance,
    parse_field,
)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "AssocLegendreJet",
    "CondCov2",
    "Cov4",
    "CountReport",
    "DegenerateConditioningError",
    "DegeneratePointError",
    "DegenerateSampleError",
    "ExperimentConfig",
    "ExperimentError",
    "FieldEvaluationError",
    "FieldJet",
    "FieldSpec",
    "HarmonicSample",
    "IntensityValue",
    "InvalidCovarianceError",
    "Jet2",
    "LegendreJet",
    "MCResult",
    "QuadratureSpec",
    "ResolutionError",
    "SpherePoint",
    "TangentPoint",
    "TildeCoeffs",
    "VTangentError",
    "abs_moment",
    "assoc_legendre_jet",
    "assoc_legendre_table",
    "cli_dispatch",
    "conditional_covariance",
    "count",
    "covariance_closed_form",
    "covariance_fd_oracle",
    "eval_jet2",
    "eval_jet2_grid",
    "eval_jet2_many",
    "expected_count",
    "field_jet",
    "find_tangent_points",
    "first_intensity",
    "geodesic_distance",
    "kernel",
    "leading_term",
    "legendre_jet",
    "load_sample",
    "main",
    "newton_refine",
    "nondegeneracy_check",
    "parse_field",
    "run_mc",
    "sample_harmonic",
    "save_sample",
    "tilde_coeffs",
    "trial_seed",
]
