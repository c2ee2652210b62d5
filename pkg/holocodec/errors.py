"""Exception hierarchy. Each class carries the CLI exit code it maps to."""
from __future__ import annotations


class HoloCodecError(Exception):
    exit_code = 1


class InvalidConfigError(HoloCodecError, ValueError):
    exit_code = 3


class InvalidFieldError(HoloCodecError, ValueError):
    """Non-finite or malformed optical field."""


class DomainError(HoloCodecError, ValueError):
    pass


class ShapeError(HoloCodecError, ValueError):
    pass


class RangeError(HoloCodecError, ValueError):
    pass


class NumericFailureError(HoloCodecError, ArithmeticError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class SequencingError(HoloCodecError, RuntimeError):
    pass


class CodingError(HoloCodecError, ValueError):
    pass


class CorruptStreamError(HoloCodecError, ValueError):
    def __init__(self, message: str, bit_offset: int | None = None):
        self.reason = message
        if bit_offset is not None:
            message = f"{message} at bit {bit_offset}"
        super().__init__(message)
        self.bit_offset = bit_offset


class ChecksumError(CorruptStreamError):
    pass


class ProtocolError(HoloCodecError, ConnectionError):
    pass


class TransportError(HoloCodecError, ConnectionError):
    def __init__(self, message: str, written: int = 0):
        super().__init__(f"{message} ({written} bytes written)")
        self.written = written


class RegistryMissError(HoloCodecError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "registry miss"


class UndefinedOverlapError(HoloCodecError, ValueError):
    pass


class ImageTooSmallError(HoloCodecError, ValueError):
    pass


class CheckpointVersionError(HoloCodecError, ValueError):
    pass
