"""Exception types raised across the library.

Check functions never raise for a *failed* verification (failures are report
contents); exceptions mark ill-posed inputs or broken preconditions.
"""


class AlgebroidLabError(Exception):
    """Base class for all library errors."""


# -- calculus ---------------------------------------------------------------

class PointOutsideChart(AlgebroidLabError):
    pass


class EvaluationPole(AlgebroidLabError):
    """Division by zero (or a negative integer power of zero) during evaluation."""


class ChartMismatch(AlgebroidLabError):
    pass


class DegreeMismatch(AlgebroidLabError):
    pass


# -- algebroid --------------------------------------------------------------

class AlgebroidMismatch(AlgebroidLabError):
    pass


class PoissonConditionFailed(AlgebroidLabError):
    pass


class ActionNotHomomorphism(AlgebroidLabError):
    pass


class RankMismatch(AlgebroidLabError):
    pass


class TransversalityFailed(AlgebroidLabError):
    pass


class BasePointMismatch(AlgebroidLabError):
    pass


class SurjectivityFailed(AlgebroidLabError):
    pass


# -- dirac ------------------------------------------------------------------

class NotCertifiedStrong(AlgebroidLabError):
    pass


class UniquenessFailure(AlgebroidLabError):
    """Rank anomaly in a pointwise solve that should have a unique solution."""


# -- action -----------------------------------------------------------------

class IntersectionNontrivial(AlgebroidLabError):
    pass


class ProjectionIllDefined(AlgebroidLabError):
    pass


# -- apath ------------------------------------------------------------------

class InitialFiberMismatch(AlgebroidLabError):
    pass


class StepCollapse(AlgebroidLabError):
    """Trajectory blew up (nonfinite state or runaway norm) during integration."""


class NoConnectingPath(AlgebroidLabError):
    pass


# -- cli / scenarios --------------------------------------------------------

class ParseError(AlgebroidLabError):
    """Expression syntax error; carries a position into the source text."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None
                         else f"{message} (at position {position})")
        self.position = position


class UnresolvedLabel(AlgebroidLabError):
    pass


class SchemaViolation(AlgebroidLabError):
    pass
