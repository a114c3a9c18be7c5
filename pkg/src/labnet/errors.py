"""Exception types raised across labnet."""


class LabnetError(Exception):
    """Base class for all labnet errors."""


class SingularMatrix(LabnetError, ArithmeticError):
    pass


class RankDeficient(LabnetError, ArithmeticError):
    pass


class DomainError(LabnetError, ValueError):
    pass


class ShapeMismatch(LabnetError, ValueError):
    pass


class InvalidArgument(LabnetError, ValueError):
    pass


class FormatError(LabnetError, ValueError):
    """Malformed data file. ``offset`` is the byte offset where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
