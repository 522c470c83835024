"""Exception types shared across the package."""


class MixbootError(Exception):
    """Base class for all structured errors raised by this package."""


class DegenerateCovariance(MixbootError):
    """A covariance matrix is singular or not positive definite."""


class EmptyCluster(MixbootError):
    """A component's effective sample mass is too small to estimate parameters."""


class NoModelFits(MixbootError):
    """Every candidate model in a selection sweep was degenerate."""


class AllReplicatesFailed(MixbootError):
    """No resampling replicate could be fitted."""


class InsufficientReplicates(MixbootError):
    """Fewer than two fitted replicates; variance is undefined."""


class UnknownSlot(MixbootError):
    """A parameter slot name does not exist in the model's layout."""


class ParseError(MixbootError):
    """A data file could not be parsed.

    Carries the 1-based (row, column) location of the offending cell when
    one can be identified.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
