"""Exception hierarchy shared by all modules."""


class SkembedError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimension(SkembedError, ValueError):
    pass


class DegenerateDomain(SkembedError, ValueError):
    pass


class ZeroVector(SkembedError, ValueError):
    pass


class UnsupportedAtom(SkembedError, ValueError):
    pass


class MassMismatch(SkembedError, ValueError):
    pass


class EmptyMeasure(SkembedError, ValueError):
    pass


class SizeCapExceeded(SkembedError, RuntimeError):
    pass


class NumericalBreakdown(SkembedError, RuntimeError):
    pass


class NotEmbeddingShaped(SkembedError, ValueError):
    pass


class SupportOffLattice(SkembedError, ValueError):
    pass


class NonProbability(SkembedError, ValueError):
    pass


class InfeasibleEmbedding(SkembedError, RuntimeError):
    """Raised when no stopping rule embeds nu; carries the Farkas certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NotOptimal(SkembedError, RuntimeError):
    pass


class SingularSystem(SkembedError, RuntimeError):
    pass


class ZeroStart(SkembedError, ValueError):
    pass


class WrongRegime(SkembedError, ValueError):
    pass


class ProfileUnreachable(SkembedError, RuntimeError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class BallEscapesDomain(SkembedError, ValueError):
    pass


class EmptyShell(SkembedError, ValueError):
    pass


class NotConverged(SkembedError, RuntimeError):
    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class PolicyGap(SkembedError, ValueError):
    pass


class ConfigError(SkembedError, ValueError):
    pass
