"""Exception hierarchy.

The three top-level categories map onto the CLI exit codes
(I/O = 3, data validation = 4, numerical failure = 5).
"""


class IrmaError(Exception):
    exit_code = 1


class IoError(IrmaError, OSError):
    exit_code = 3


class DataError(IrmaError, ValueError):
    exit_code = 4


class NumericalError(IrmaError, ArithmeticError):
    exit_code = 5


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ShapeMismatch(DataError):
    pass


class EmptyClass(DataError):
    pass


class EmptyTestClass(DataError):
    pass


class ZeroVariance(DataError):
    def __init__(self, feature):
        super().__init__(f"feature {feature!r} has zero variance")
        self.feature = feature


class NonUnitDirection(DataError):
    pass


class NotSymmetric(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DegenerateDistance(NumericalError):
    pass


class AllRelevanceRemoved(NumericalError):
    pass
