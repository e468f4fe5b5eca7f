"""Exception hierarchy shared across the package."""


class FourplError(Exception):
    """Base class for all errors raised by fourpl."""


class DataError(FourplError):
    """Malformed input data: bad columns, bad values, unreadable files."""


class InvalidParametersError(FourplError):
    """Item parameters violate the asymptote feasibility constraints."""


class DegenerateWeightError(FourplError):
    """Weighted residual sum hit a probability numerically at 0 or 1."""


class EstimationCrash(FourplError):
    """Internal signal for a numerical failure inside a fit.

    Fit drivers catch this and report status ``CRASHED``; it never
    escapes a ``fit_*`` call.
    """


class InitializationError(FourplError):
    """Starting values cannot be computed from this dataset."""


class SingularMatrixError(FourplError):
    """A covariance building block is singular or too ill-conditioned."""


class NotPositiveDefiniteError(SingularMatrixError):
    """A covariance estimate fails the positive-semidefiniteness check."""


class BoundarySolutionError(FourplError):
    """An estimate sits on the asymptote feasibility boundary, where the
    asymptotic theory behind the requested quantity does not apply."""
