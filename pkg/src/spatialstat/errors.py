"""Exception types raised across the package.

Everything derives from :class:`SpatialError`. Errors caused by bad user
input additionally derive from :class:`ValueError`; errors caused by a
numerical breakdown (singular systems, failed factorizations, diverged
fits) derive from :class:`NumericalError`. The command-line front end maps
the first group to exit code 2 and the second to exit code 1.
"""


class SpatialError(Exception):
    """Base class for all package errors."""


class InputError(SpatialError, ValueError):
    """Invalid input supplied by the caller."""


class NumericalError(SpatialError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


# core
class EmptyDataset(InputError):
    pass


class DuplicateLocation(InputError):
    def __init__(self, i, j, msg=None):
        self.pair = (int(i), int(j))
        super().__init__(msg or f"duplicate locations at indices {i} and {j}")


class DimensionMismatch(InputError):
    pass


class ZeroResolution(InputError):
    pass


class InvalidWindow(InputError):
    pass


class InvalidParameter(InputError):
    pass


class SingularCovariance(NumericalError):
    pass


# covariance / kriging
class NegativeDistance(InputError):
    pass


class InsufficientData(InputError):
    pass


class TooFewBins(InputError):
    pass


class TooFewObservations(InputError):
    pass


class RankDeficientTrend(InputError):
    pass


class FitDiverged(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


# lattice
class ZeroSize(InputError):
    pass


class AsymmetricPrecision(InputError):
    pass


class NotPositiveDefinite(NumericalError):
    def __init__(self, msg, min_eigenvalue=None):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(msg)


class NotBipartite(InputError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(f"graph is not bipartite; odd cycle through nodes {self.cycle}")


# point processes
class NegativeIntensity(InputError):
    pass


class UnboundedIntensity(InputError):
    pass


class RegionOutsideWindow(InputError):
    pass


class TooFewPoints(InputError):
    pass


class RadiusTooLarge(InputError):
    pass


class TooFewSimulations(InputError):
    pass


# multivariate / vecchia / spacetime
class GridTooCoarse(InputError):
    pass


class SingularNeighborBlock(NumericalError):
    pass


class NonPositiveInnovationCovariance(NumericalError):
    pass


# cli
class EmptyMap(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, key, msg):
        self.key = key
        super().__init__(f"{key}: {msg}")
