class PatternmarkError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(PatternmarkError, ValueError):
    pass


class InvalidPattern(InvalidArgument):
    pass


class InvalidToken(InvalidArgument):
    pass


class InvalidInput(InvalidArgument):
    pass


class GenerationImpossible(PatternmarkError):
    pass


class InfeasiblePlan(PatternmarkError, ValueError):
    pass


class InvalidPlan(PatternmarkError, ValueError):
    pass


class CalibrationError(PatternmarkError):
    pass


class BoundInapplicable(PatternmarkError, ValueError):
    """The threshold lies outside the range where a bound holds."""


class InsufficientProfile(PatternmarkError, KeyError):
    pass
