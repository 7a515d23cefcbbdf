"""Exception hierarchy shared by every analysis module."""


class PwsbifError(Exception):
    """Base class for all errors raised by the package."""


class NoManifoldInRegion(PwsbifError):
    pass


class StepSizeUnderflow(PwsbifError):
    pass


class Blowup(PwsbifError):
    pass


class NoReturn(PwsbifError):
    """The trajectory did not come back to the section within the time cap."""


class LeftDomain(PwsbifError):
    pass


class NoConvergence(PwsbifError):
    pass


class SingularJacobian(PwsbifError):
    pass


class WrongSpectrum(PwsbifError):
    pass


class NoBracket(PwsbifError):
    pass


class NoFold(PwsbifError):
    pass


class ContinuationStall(PwsbifError):
    pass


class MuTooSmall(PwsbifError):
    pass


class OutOfChartRange(PwsbifError):
    pass


class DegenerateCase(PwsbifError):
    """A genericity condition fails; ``condition`` names it."""

    def __init__(self, condition, value=None):
        self.condition = condition
        self.value = value
        msg = condition if value is None else f"{condition} (measured {value:.3e})"
        super().__init__(msg)


class ZeroGamma(PwsbifError):
    pass


class SignMixture(PwsbifError):
    pass


class InsufficientSpan(PwsbifError):
    pass


class MissingCurve(PwsbifError):
    pass
