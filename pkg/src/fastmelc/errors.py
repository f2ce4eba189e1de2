"""Exception hierarchy shared across the package."""


class MelcError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MelcError, ValueError):
    pass


class DegenerateProjection(MelcError, ArithmeticError):
    """A class collapses to a single projected value (zero sample variance)."""


class EmptyInput(MelcError, ValueError):
    pass


class NonPositiveVariance(MelcError, ValueError):
    pass


class NonFiniteObjective(MelcError, ArithmeticError):
    """Objective returned NaN."""


class LineSearchFailure(MelcError, RuntimeError):
    pass


class AllRunsFailed(MelcError, RuntimeError):
    pass


class LengthMismatch(MelcError, ValueError):
    pass


class DataError(MelcError, ValueError):
    """Base for problems with user supplied data files."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotBinary(DataError):
    pass


class TooSmallClass(DataError):
    pass


class RaggedRows(DataError):
    pass


class TooFewPointsPerClass(DataError):
    pass


class EmptyRecords(MelcError, ValueError):
    pass
