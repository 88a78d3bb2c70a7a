"""Exception hierarchy.

Errors fall into two families so callers (and the CLI) can map them to exit
codes: configuration problems and numerical problems.
"""


class LieDetectError(Exception):
    """Base class for all package errors."""


class ConfigError(LieDetectError, ValueError):
    """Invalid input or parameter combination."""


class NumericalError(LieDetectError, ArithmeticError):
    """A numerical stage could not produce a trustworthy answer."""


# matrix kernel
class InvalidMatrix(ConfigError):
    pass


class NotSkewSymmetric(ConfigError):
    pass


class NotPSD(NumericalError):
    pass


class DimensionMismatch(ConfigError):
    pass


# catalog
class EmptyAmbient(ConfigError):
    pass


class NoAlmostFaithfulRep(ConfigError):
    pass


class NoRealIrrep(ConfigError):
    pass


class RankDeficient(ConfigError):
    pass


# preprocessing
class DegenerateCloud(NumericalError):
    pass


class AmbiguousCut(UserWarning):
    """Emitted when two eigenvalues straddling a dimension cut coincide."""


# LiePCA
class IsolatedPoint(NumericalError):
    pass


class TangentEstimationFailed(NumericalError):
    pass


class ZeroPointInCloud(ConfigError):
    pass


# fitting
class DegenerateEigenframe(NumericalError):
    pass


class OptimizerDiverged(NumericalError):
    pass


class NonReducibleFrame(NumericalError):
    pass


class NoCandidates(ConfigError):
    pass


# verification
class EmptySample(ConfigError):
    pass


class EmptySet(ConfigError):
    pass


class BadWeights(ConfigError):
    pass


# synthetic data
class DegenerateBasePoint(ConfigError):
    pass


class SamplerStalled(NumericalError):
    pass
