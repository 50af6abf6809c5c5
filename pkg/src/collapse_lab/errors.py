"""Exception hierarchy shared by all collapse_lab modules."""


class CollapseLabError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(CollapseLabError, ValueError):
    """Bad user input: parameters, chart data, observables."""


class NumericalError(CollapseLabError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class OutOfDomain(ValidationError):
    pass


class DerivativeUnavailable(ValidationError):
    pass


class SingularPoint(NumericalError):
    pass


class NonInvertible(NumericalError):
    pass


class DegenerateMetric(NumericalError):
    pass


class ZeroDispersion(NumericalError):
    pass


class NotUnit(ValidationError):
    pass


class EmptyGrid(ValidationError):
    pass


class NotAnEndpoint(ValidationError):
    pass


class IncompleteManifold(ValidationError):
    pass


class WrongChart(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class NonConvergence(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class InsufficientData(ValidationError):
    pass


class NotCompact(ValidationError):
    pass
