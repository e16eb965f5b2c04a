"""Exception types raised across the package."""


class RelayDmtError(Exception):
    """Base class for all library errors."""


class SingularMatrix(RelayDmtError):
    """A determinant argument or conditional covariance is not positive definite."""


class InvalidSubsetSize(RelayDmtError, ValueError):
    pass


class TooManyPaths(RelayDmtError):
    pass


class DimensionMismatch(RelayDmtError, ValueError):
    pass


class RequiresMtGeMr(RelayDmtError, ValueError):
    pass


class NoFeasibleNoise(RelayDmtError):
    """Compression-noise inflation hit its cap without satisfying every subset constraint."""
