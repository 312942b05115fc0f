"""Exception hierarchy shared by every stage of the toolkit."""

from __future__ import annotations


class PshGlueError(Exception):
    """Base class for all toolkit errors."""


# evaluation ---------------------------------------------------------------

class EvaluationError(PshGlueError):
    pass


class SingularPoint(EvaluationError):
    """Evaluation requested on (or too close to) a singular locus."""


class DomainViolation(EvaluationError):
    """Point outside the declared box, or argument outside a function's domain."""


class StepTooLarge(EvaluationError):
    """Richardson levels of a finite-difference jet disagree beyond tolerance."""


# geometry -----------------------------------------------------------------

class NotHermitian(PshGlueError):
    pass


class DimensionMismatch(PshGlueError):
    pass


class NegativeSpeed(PshGlueError):
    """The metric is not positive semidefinite at a quadrature node."""


class EmptyDomain(PshGlueError):
    pass


# pipeline -----------------------------------------------------------------

class DegenerateBounds(PshGlueError):
    pass


class RangeViolation(PshGlueError):
    pass


class NoMargin(PshGlueError):
    pass


class BelowRhoMin(PshGlueError):
    pass


class ExhaustionDegenerate(PshGlueError):
    pass


class DominationFailure(PshGlueError):
    def __init__(self, message, chart=None, point=None, margin=None):
        super().__init__(message)
        self.chart = chart
        self.point = point
        self.margin = margin


class KSearchFailed(PshGlueError):
    pass


# configuration ------------------------------------------------------------

class ConfigError(PshGlueError):
    """Anything wrong with a scenario file; maps to exit code 2."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, path, message):
        self.path = path
        where = "/".join(str(p) for p in path) or "<root>"
        super().__init__(f"{where}: {message}")


class UnknownExprNode(ConfigError):
    pass


class IoError(PshGlueError):
    """A report could not be written or read back."""
