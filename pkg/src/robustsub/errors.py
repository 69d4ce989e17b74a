"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument or configuration (CLI exit code 2)."""


class SizeLimitError(ValueError):
    """Refusal to run an exhaustive routine beyond its size limit (CLI exit code 3)."""


class DomainError(IndexError):
    """Element index outside the ground set."""


class MatroidAxiomError(ParameterError):
    """An explicit family violates a matroid axiom.

    ``counterexample`` holds the offending sets.
    """

    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


class GammaTooLarge(Exception):
    """The direction-finding LP is infeasible at the requested target value."""


class MembershipError(ValueError):
    """A fractional point lies outside the requested polytope.

    ``violation`` is a dict describing the violated inequality.
    """

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class RoundingError(RuntimeError):
    """Swap rounding could not find an exchange partner."""
