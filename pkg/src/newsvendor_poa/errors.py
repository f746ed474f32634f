"""Exception hierarchy shared by every module of the package."""


class NewsvendorError(Exception):
    """Base class for all package errors."""


class SurvivalUnderflow(NewsvendorError, ArithmeticError):
    """Survival (or marginal) value fell below the numeric floor."""


class NonDifferentiablePoint(NewsvendorError, ValueError):
    """A derivative was requested exactly at a declared kink."""


class DerivativeUnavailable(NewsvendorError, ValueError):
    """Higher-order derivatives cannot be formed for this model."""


class InadmissibleRatio(NewsvendorError, ValueError):
    """Cost ratio outside (0, X(0)): no positive profit is attainable."""


class NoConvergence(NewsvendorError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class BracketFailure(NewsvendorError, RuntimeError):
    """No sign change on the search interval."""


class OutOfRange(NewsvendorError, ValueError):
    """A bound formula was called outside its parameter domain."""


class SingularParameter(OutOfRange):
    """Parameter sits at a singularity of the formula (e.g. k -> 1)."""


class DegenerateScenario(NewsvendorError, ValueError):
    """Decentralized profit is numerically zero, so the PoA ratio is undefined."""


class InsufficientData(NewsvendorError, ValueError):
    """Too few samples to fit a density."""


class EmptyBins(NewsvendorError, ValueError):
    """Too many histogram bins are empty for a log-density fit."""


class NonNormalizable(NewsvendorError, ValueError):
    """Fitted density has a non-finite or non-positive integral."""
