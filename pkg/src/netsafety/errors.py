"""Exception types shared across the toolkit."""


class NetSafetyError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(NetSafetyError):
    """Input file does not conform to its declared schema."""


class DataError(NetSafetyError):
    """Input data is well-formed but semantically invalid or insufficient."""


class ParameterError(NetSafetyError):
    """An argument or configuration value is outside its admissible range."""


class GeometryError(DataError):
    """Vehicle pair geometry violates a metric's precondition (e.g. leader behind follower)."""


class PointAtInfinityError(DataError):
    """Projective transform sent a point to infinity (homogeneous scale ~ 0)."""


class SingularDesignError(DataError):
    """Regression design matrix is rank deficient."""

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = list(columns) if columns else []


class NonConvergenceError(DataError):
    """Iterative fit failed to converge within its iteration budget."""
