"""Exception hierarchy shared by every relact module.

The CLI maps any ``RelactError`` to exit code 2 and prints the class name,
so the names here are part of the command-line contract.
"""


class RelactError(Exception):
    """Base class for all library errors."""


class InvalidRotation(RelactError, ValueError):
    pass


class DegenerateInput(RelactError, ValueError):
    pass


class LengthMismatch(RelactError, ValueError):
    pass


class EmptyPath(RelactError, ValueError):
    pass


class HorizonOverrun(RelactError, ValueError):
    pass


class KindMismatch(RelactError, ValueError):
    pass


class DimensionMismatch(RelactError, ValueError):
    pass


class ActiveJointPerturbation(RelactError, ValueError):
    pass


class Unreachable(RelactError, ValueError):
    pass


class InvalidParameter(RelactError, ValueError):
    pass


class ChainFormatError(RelactError, ValueError):
    pass


class SchemaVersionMismatch(RelactError, ValueError):
    pass


class MalformedRecord(RelactError, ValueError):
    """A demonstration file could not be parsed.

    ``step`` is the zero-based index of the offending step, or ``None`` when
    the header itself is broken.
    """

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        where = "header" if step is None else f"step {step}"
        super().__init__(f"{where}: {message}")


class RecordTooShort(RelactError, ValueError):
    pass


class EmptyInput(RelactError, ValueError):
    pass
