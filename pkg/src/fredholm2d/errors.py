"""Exception hierarchy shared by all fredholm2d modules."""


class Fredholm2DError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(Fredholm2DError, ValueError):
    """An input parameter is outside its documented range.

    The offending key or parameter name is kept in ``key`` so that the
    CLI can report it.
    """

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or key)


class NumericalError(Fredholm2DError):
    """A numerical procedure failed (CLI exit code 2)."""


# domain
class EmptyDomain(Fredholm2DError):
    pass


class SpacingTooLarge(ValidationError):
    def __init__(self, message="spacing too large for domain"):
        super().__init__("h", message)


class EmptyNodeSet(Fredholm2DError, ValueError):
    pass


# quadrature
class DegreeTooLarge(ValidationError):
    def __init__(self, degree):
        super().__init__("degree", f"degree {degree} exceeds 20")


class RankDeficient(NumericalError):
    pass


class InfeasibleNonnegative(NumericalError):
    pass


class ZeroError(NumericalError):
    pass


# reconstruction
class InsufficientLocalNodes(NumericalError):
    pass


class DimensionMismatch(Fredholm2DError, ValueError):
    pass


# kernel
class NonpositiveSigma(ValidationError):
    def __init__(self, sigma):
        super().__init__("sigma", f"sigma must be positive, got {sigma}")


class NotRadial(Fredholm2DError, ValueError):
    pass


class NoDecay(NumericalError):
    pass


# solver
class ZeroLambda(ValidationError):
    def __init__(self):
        super().__init__("lambda", "lambda must be nonzero")


class NodeMismatch(Fredholm2DError, ValueError):
    pass


class SingularMatrix(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


# problems
class NonpositiveS(NumericalError):
    pass


# study
class NonpositiveInput(ValidationError):
    def __init__(self, message="errors and spacings must be positive"):
        super().__init__("errors", message)


class ParseError(ValidationError):
    """Malformed config text; ``lineno`` is 1-based or None."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__("config", where + message)
