"""Exception hierarchy shared by every module of the package."""


class BiflabError(Exception):
    """Base class for all package errors."""


class EscapeEvent(BiflabError, ArithmeticError):
    """Raised when an evaluation overflows; the orbit is treated as escaped."""


class CollidedCriticalPoints(BiflabError):
    """Two marked critical points coincide at the requested parameter."""


class NotPolynomial(BiflabError):
    pass


class RootSolveFailure(BiflabError):
    pass


class PeriodTooLarge(BiflabError):
    pass


class NoConvergence(BiflabError):
    """A Newton-type solver did not reach its residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class WrongExactPeriod(BiflabError):
    def __init__(self, message, period=None, result=None):
        super().__init__(message)
        self.period = period
        self.result = result


class ContinuationStalled(BiflabError):
    """Continuation could not advance; ``path`` holds the accepted points."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path or []


class CyclesCollided(BiflabError):
    pass


class RankDeficient(BiflabError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class LandingNotRepelling(BiflabError):
    def __init__(self, message, multiplier=None):
        super().__init__(message)
        self.multiplier = multiplier


class DegenerateJacobian(BiflabError):
    """A Misiurewicz relation is solved but transversality fails.

    ``certificate`` carries the uncertified solution so it can be handed to
    :func:`biflab.misiurewicz.transversality_rescue`.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class RescueExhausted(BiflabError):
    pass


class GridMismatch(BiflabError):
    pass


class NoCenterFound(BiflabError):
    pass


class ChartDegenerate(BiflabError):
    pass


class WindowTooDistorted(UserWarning):
    """Emitted (as a warning) when a renormalization window has h_sup >= delta."""


class OutsideChart(BiflabError):
    pass


class PolishFailed(BiflabError):
    pass


class AlternationDiverged(BiflabError):
    pass


class FactorDiagnosticFailed(BiflabError):
    def __init__(self, message, factor=None):
        super().__init__(message)
        self.factor = factor


class InsufficientScales(BiflabError):
    pass


class InsufficientSpread(BiflabError):
    pass


class NoCertificateAvailable(BiflabError):
    pass


class NotFound(BiflabError):
    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = evidence


class UnknownArtifactType(BiflabError):
    pass


class SchemaError(BiflabError):
    pass
