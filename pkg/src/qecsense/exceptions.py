"""Exception hierarchy shared by every module of the package."""


class QecSenseError(Exception):
    """Base class for all errors raised by qecsense."""


class DegenerateFieldError(QecSenseError, ValueError):
    """The field magnitude is zero, so direction cosines are undefined."""


class VariantError(QecSenseError, ValueError):
    """The operation is not defined for the requested protocol variant."""


class NumericalError(QecSenseError, ArithmeticError):
    """Base for failures that come from the numbers rather than the inputs."""


class SingularMatrixError(NumericalError):
    """A Fisher matrix is singular to within the relative determinant guard."""


class NoInformationError(NumericalError):
    """The protocol acquires no information at this parameter point."""


class InsufficientPointsError(QecSenseError, ValueError):
    pass


class SizeLimitError(QecSenseError, ValueError):
    """Requested statevector simulation exceeds the exact-simulation budget."""


class InvalidModelError(QecSenseError, ValueError):
    pass


class EmptyPosteriorError(NumericalError):
    """The data has zero likelihood everywhere on the grid."""


class EmptyOverlapError(NumericalError):
    """The effective-field credible set does not meet the syndrome posterior."""
