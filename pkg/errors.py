from typing import Optional, Sequence


class ContractViolation(ValueError):
    """Raised when an operation's precondition does not hold"""


class ShapeMismatch(ContractViolation):
    """Operand shapes do not conform to the operation's shape rule"""

    def __init__(self, op: str, *shapes: Sequence[int]):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = " vs ".join(str(list(s)) for s in self.shapes)
        super().__init__(f"{op}: shape mismatch {rendered}")


class ZeroNormError(ContractViolation):
    """A gradient vector with zero norm was handed to the cosine distance"""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} (inversion step {step})"
        super().__init__(message)


class ConfigError(ContractViolation):
    """Malformed or unknown entries in a study config file"""


class ArchiveError(Exception):
    """Base class for checkpoint archive load failures"""


class CorruptManifestError(ArchiveError):
    pass


class OffsetMismatchError(ArchiveError):
    pass


class VersionMismatchError(ArchiveError):
    pass


class PGMParseError(ValueError):
    """Malformed PGM header or payload"""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte {offset}")
