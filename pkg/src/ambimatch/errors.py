"""Exception types raised across the package."""


class AmbimatchError(ValueError):
    """Base class for domain errors (bad inputs, unsupported regimes)."""


class NonSquare(AmbimatchError):
    pass


class NegativeEntry(AmbimatchError):
    pass


class NotNormalized(AmbimatchError):
    pass


class AsymmetricInput(AmbimatchError):
    pass


class InvalidN(AmbimatchError):
    pass


class DimensionMismatch(AmbimatchError):
    pass


class LengthMismatch(AmbimatchError):
    pass


class NonIntegralSeedCount(AmbimatchError):
    pass


class InvalidFamilyParams(AmbimatchError):
    pass


class UnequalMarginals(AmbimatchError):
    pass


class TooLarge(AmbimatchError):
    pass


class OutOfRange(AmbimatchError):
    pass


class AlphaOutOfRange(AmbimatchError):
    pass


class InvalidScenarioParams(AmbimatchError):
    pass


class DecayExponentOutOfRange(AmbimatchError):
    pass


class ConfigParse(AmbimatchError):
    pass


class BudgetExhaustedEverywhere(AmbimatchError):
    pass
