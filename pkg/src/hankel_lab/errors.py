"""Exception hierarchy shared by all hankel_lab modules."""


class HankelLabError(Exception):
    """Base class for every error raised by the library."""


class DomainError(HankelLabError, ValueError):
    """Argument outside the domain of the operation (e.g. t <= 0)."""


class NonConvergent(HankelLabError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class SupportError(HankelLabError, ValueError):
    """Measure has mass outside the admissible support."""


class UnclassifiableRule(HankelLabError, ValueError):
    """Blaschke generator rule outside the supported comparison classes."""


class Inconclusive(HankelLabError, ArithmeticError):
    """Numerical tail classification did not stabilise."""


class ExtrapolationError(HankelLabError, ValueError):
    """Tabulated object evaluated outside its grid."""


class SingularityError(HankelLabError, ValueError):
    """Kernel too singular for the requested discretisation."""


class LengthError(HankelLabError, ValueError):
    """Sequence too short for the requested section order."""


class DimensionError(HankelLabError, ValueError):
    """Vector length does not match the section order."""


class ConvergenceFailure(HankelLabError, ArithmeticError):
    """Eigen-decomposition failed its residual check."""


class DegenerateFit(HankelLabError, ArithmeticError):
    """Least-squares fit has no usable data."""


class UnknownCheck(HankelLabError, KeyError):
    """Verification check id not registered."""


class SpecError(HankelLabError, ValueError):
    """Malformed JSON spec (measure, kernel, test function, corpus)."""
