"""Exception types shared across the package."""


class DaestructError(Exception):
    """Base class for all library errors."""


# expression core
class UnboundVariable(DaestructError):
    pass


class DomainError(DaestructError):
    pass


class OrderLimitError(DaestructError):
    """Derivative order exceeded the hard cap (runaway prolongation guard)."""


# structural analysis
class NotSquare(DaestructError):
    pass


class EmptyRow(DaestructError):
    pass


class NoPerfectMatching(DaestructError):
    """Signature matrix admits no finite perfect matching: structurally singular DAE."""


# numerical linear algebra
class NonFinite(DaestructError):
    pass


class SingularJacobian(DaestructError):
    pass


class NoConvergence(DaestructError):
    pass


class RankMismatch(DaestructError):
    pass


# witness points
class NonPolynomialConstraint(DaestructError):
    pass


# regularization
class NoSolution(DaestructError):
    """Degrees of freedom would drop below zero: the DAE has no solution."""


class IterationLimit(DaestructError):
    pass


# integration
class SingularTopBlock(DaestructError):
    pass


class InconsistentInitialPoint(DaestructError):
    pass


# input files
class DaeSyntaxError(DaestructError):
    def __init__(self, message, line=None, col=None):
        loc = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.col = col


class UndeclaredIdentifier(DaeSyntaxError):
    pass


class CountMismatch(DaestructError):
    pass


class InitRequired(DaestructError):
    """Witness computation unavailable; the input file must supply an init block."""
