"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class DegenerateRowError(ValueError):
    """A softmax row has no finite entry."""


class EmptyInputError(ValueError):
    """An operation received zero rows or frames."""


class ConfigError(ValueError):
    """Invalid configuration value."""


class StreamStateError(RuntimeError):
    """A stream session was used out of order (e.g. push after finalize)."""


class FormatError(ValueError):
    """A binary file does not match the expected layout."""
