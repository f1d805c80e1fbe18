"""Exception hierarchy. ``exit_code`` is what the CLI returns for each kind."""


class ResolventLabError(Exception):
    exit_code = 6


class InputError(ResolventLabError, ValueError):
    """Malformed file, unknown name, or bad dimension."""

    exit_code = 2


class BadDimension(InputError):
    pass


class UnknownScenario(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ParameterError(ResolventLabError, ValueError):
    """Grid, annulus or resolution arguments that cannot be used."""

    exit_code = 3


class EmptyAnnulus(ParameterError):
    pass


class ResolutionTooCoarse(ParameterError):
    pass


class DimensionBudgetExceeded(ParameterError):
    pass


class FitError(ResolventLabError):
    exit_code = 4


class InsufficientDecades(FitError):
    pass


class DegenerateFit(FitError):
    pass


class HypothesisViolation(ResolventLabError):
    """f' vanishes on K, so the converse statement does not apply."""

    exit_code = 5

    def __init__(self, message, critical_points=()):
        super().__init__(message)
        self.critical_points = list(critical_points)


class NumericalError(ResolventLabError, ArithmeticError):
    exit_code = 6


class NonFinite(NumericalError):
    pass


class SpectrumProximity(NumericalError):
    pass


class RootFindingFailure(NumericalError):
    pass


class CriticalValueCollision(NumericalError):
    pass


class ContourTooClose(NumericalError):
    pass


class ContourOutsideDomain(NumericalError):
    pass


class QuadratureStall(NumericalError):
    pass
