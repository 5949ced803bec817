"""Exception hierarchy.

Two families: ``ValidationError`` for bad inputs (CLI exit code 1) and
``NumericalError`` for failures of the numerics themselves (exit code 2).
"""


class PhrecError(Exception):
    exit_code = 1


class ValidationError(PhrecError, ValueError):
    exit_code = 1


class NumericalError(PhrecError, ArithmeticError):
    exit_code = 2


# -- structure ----------------------------------------------------------------

class NotSquare(ValidationError):
    pass


class SignViolation(ValidationError):
    def __init__(self, row, col, value):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"entry ({row}, {col}) = {float(value):g} has the wrong sign")


class RowSumPositive(ValidationError):
    def __init__(self, row, value):
        self.row, self.value = row, value
        super().__init__(f"row {row} sums to {float(value):g} > 0")


class AllRowsConservative(ValidationError):
    pass


class NegativeTime(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class ZeroProbabilityStage(ValidationError):
    pass


class BadInterval(ValidationError):
    pass


class UnknownFlag(ValidationError):
    pass


# -- data ingestion -----------------------------------------------------------

class MalformedRow(ValidationError):
    def __init__(self, line, reason=""):
        self.line = line
        super().__init__(f"malformed row at line {line}" + (f": {reason}" if reason else ""))


class InconsistentPair(ValidationError):
    def __init__(self, pid, reason=""):
        self.id = pid
        super().__init__(f"patient {pid}: inconsistent rows" + (f" ({reason})" if reason else ""))


class NonmonotoneInterval(ValidationError):
    def __init__(self, pid, reason=""):
        self.id = pid
        super().__init__(f"patient {pid}: non-monotone interval" + (f" ({reason})" if reason else ""))


# -- numerics -----------------------------------------------------------------

class Overflow(NumericalError):
    pass


class Singular(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    pass


class SequenceExplosion(NumericalError):
    pass


class NonFiniteRate(NumericalError):
    pass


class NonPositiveLikelihood(NumericalError):
    def __init__(self, pid, value):
        self.id, self.value = pid, value
        super().__init__(f"log-likelihood contribution of patient {pid} is {float(value):g}")


class AllStartsFailed(NumericalError):
    pass


class BootstrapFailure(NumericalError):
    pass
