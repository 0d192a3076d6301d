class DepmixError(Exception):
    """Base class for library errors."""


class ParameterError(DepmixError, ValueError):
    """Invalid distribution or model parameter."""


class SpecError(DepmixError, ValueError):
    """Malformed basis or model specification."""


class DegenerateDataError(DepmixError, ValueError):
    """Data cannot support the requested construction (constant column, rank deficiency)."""


class NumericError(DepmixError, ArithmeticError):
    """Non-finite values or failed decompositions during computation."""
