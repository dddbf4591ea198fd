"""Exception hierarchy shared by every module in the package."""


class QSimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(QSimError, ValueError):
    pass


class CodecDecodeError(QSimError):
    """A compressed block is truncated, corrupt or internally inconsistent."""


class CircuitParseError(QSimError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CapacityError(QSimError):
    """The requested qubit count exceeds a configured size guard."""


class NumericDegradationError(QSimError):
    """The global norm drifted further than the engine tolerates."""


class EngineError(QSimError):
    """A gate pass failed; carries the gate position and slice index."""

    def __init__(self, message: str, gate_index: int, slice_index: int | None = None):
        where = f"gate {gate_index}"
        if slice_index is not None:
            where += f", slice {slice_index}"
        super().__init__(f"{where}: {message}")
        self.gate_index = gate_index
        self.slice_index = slice_index
