"""Shared exception types; the CLI maps them onto exit codes."""


class NeurodecError(Exception):
    """Base class for package errors."""


class ConfigError(NeurodecError):
    """Invalid configuration value or unknown config key (CLI exit 2)."""


class ShapeError(NeurodecError):
    """Operand shapes do not conform (CLI exit 4)."""


class DataFormatError(NeurodecError):
    """A data file is malformed or inconsistent (CLI exit 4)."""


class ChecksumError(DataFormatError):
    """Stored checksum does not match the file contents."""


class TrainingDiverged(NeurodecError):
    """Training hit a non-finite loss or gradient (CLI exit 3)."""


class NonFiniteGradient(TrainingDiverged):
    """An optimizer step was rejected because a gradient was not finite."""


class NumericsWarning(UserWarning):
    """A degenerate numeric case was handled (zero variance, zero vector)."""
