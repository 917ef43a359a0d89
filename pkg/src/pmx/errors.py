"""Exception types shared across the package."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class ShapeError(ContractError):
    """Operand shapes are incompatible for the requested operation."""


class FormatError(ValueError):
    """A file does not conform to its binary format."""


class CorruptionError(FormatError):
    """A file parses but fails its integrity checksum."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries a diagnostic description."""
