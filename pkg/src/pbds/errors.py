"""Exception hierarchy shared by all modules."""


class PBDSError(Exception):
    """Base class for every error raised by the package."""


class SchemaError(PBDSError):
    pass


class PlanTypeError(PBDSError):
    """Ill-typed expression or condition (string arithmetic, mixed comparisons)."""


class ParseError(PBDSError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.reason = message


class UnboundParameterError(PBDSError):
    pass


class PartitionError(PBDSError):
    pass


class SketchError(PBDSError):
    pass


class CaptureError(PBDSError):
    pass


class LogicTypeError(PBDSError):
    pass


class ReuseError(PBDSError):
    pass


class DataError(PBDSError):
    """CSV ingestion problems; carries the offending line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
