"""Exception types raised across the package."""


class SpecstabError(Exception):
    """Base class for all package errors."""


# specfun
class InvalidOrder(SpecstabError, ValueError):
    pass


class NonconvergentSeries(SpecstabError, ArithmeticError):
    pass


class BracketExhausted(SpecstabError, RuntimeError):
    pass


# geometry
class InconsistentCharts(SpecstabError, ValueError):
    pass


class AtlasMismatch(SpecstabError, ValueError):
    pass


class InvalidC(SpecstabError, ValueError):
    pass


class InvalidDomain(SpecstabError, ValueError):
    pass


# sector
class IntegerOrder(SpecstabError, ValueError):
    pass


class BranchJump(SpecstabError, RuntimeError):
    pass


class DenominatorVanishing(SpecstabError, ArithmeticError):
    pass


class NoConvergence(SpecstabError, RuntimeError):
    pass


class ZeroDerivative(SpecstabError, ArithmeticError):
    pass


class KMaxTooSmall(SpecstabError, ValueError):
    pass


class InclusionViolated(SpecstabError, AssertionError):
    pass


# transition
class IllConditioned(SpecstabError, ArithmeticError):
    pass


class OutOfDomain(SpecstabError, ValueError):
    pass


class CoverageGap(SpecstabError, ValueError):
    pass


class SupportViolation(SpecstabError, ValueError):
    pass


class InsufficientPadding(SpecstabError, ValueError):
    pass


class VanishingCondition(SpecstabError, ValueError):
    pass


# eigensolver
class GridTooCoarse(SpecstabError, ValueError):
    pass


# lab
class DegenerateData(SpecstabError, ValueError):
    pass


class NotNested(SpecstabError, ValueError):
    pass
