"""Exception types shared across the package."""


class VTangentError(Exception):
    """Base class for all package errors."""


class ArgumentError(VTangentError, ValueError):
    """An argument is outside its documented range."""


class FieldEvaluationError(VTangentError):
    """A user-supplied field component formula failed to evaluate."""


class DegeneratePointError(VTangentError):
    """Operation requested at (or numerically at) a zero of V."""


class DegenerateConditioningError(VTangentError):
    """Conditioning block of the covariance is not positive definite."""


class InvalidCovarianceError(VTangentError):
    """A matrix that must be positive semidefinite is not."""


class DegenerateSampleError(VTangentError):
    """Candidate flood: the solution set is a curve, not isolated points."""


class ResolutionError(VTangentError):
    """Quadrature failed to converge under node doubling."""


class ExperimentError(VTangentError):
    """A Monte Carlo experiment produced no usable trials."""
