"""Exception types raised across the package."""


class GameError(Exception):
    """Base class for all package errors."""


class DataError(GameError):
    """Bad or inconsistent input data (maps to CLI exit code 2)."""


class NumericError(GameError):
    """Non-finite values during training or evaluation (exit code 3)."""


class EmptyInput(DataError):
    pass


class AllDegenerate(DataError):
    """Every pair record collapsed to a self-pair after normalization."""


class DeadEnd(DataError):
    """No simple 4-passage walk was found within the retry budget."""


class InsufficientGraph(DataError):
    pass


class EmptyFile(DataError):
    pass


class MalformedLine(DataError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ConfigMismatch(DataError):
    pass


class DigestMismatch(DataError):
    pass


class DegenerateGate(NumericError):
    pass


class NonFiniteLoss(NumericError):
    pass
