"""Exception types shared across the package.

The CLI maps these onto exit codes: argument/config problems exit with 2,
data and format problems with 3, numerical failures with 4.
"""


class MccaSpeechError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ArgumentError(MccaSpeechError, ValueError):
    """An argument is outside its documented domain."""

    exit_code = 2


class ConfigError(ArgumentError):
    """An experiment or model configuration is invalid."""


class DataError(MccaSpeechError):
    """Input data cannot be used."""

    exit_code = 3


class PersistenceError(DataError, OSError):
    """Reading or writing a file failed at the OS level."""


class FormatError(DataError):
    """A file does not follow its declared layout."""


class ValidationError(DataError, ValueError):
    """Values are present but violate an invariant (e.g. NaN entries)."""


class ParseError(DataError, ValueError):
    """A text file (manifest, CSV) could not be parsed."""


class UnsupportedFormatError(DataError):
    """Audio encoding is outside what the reader accepts."""


class TrainingError(DataError):
    """Training data is unusable, e.g. only one class present."""


class NumericError(MccaSpeechError, ArithmeticError):
    """A numerical routine failed (non-convergence, divergence, singularity)."""

    exit_code = 4
