"""Error taxonomy shared by the library and the CLI.

Each error class carries a short machine-readable ``kind`` and the exit
code the CLI maps it to.  Plain ``ValueError`` raised by the library for
precondition violations is mapped to the same code as DimensionError.
"""

from __future__ import annotations


class TravmapError(Exception):
    """Base class for all toolkit-specific errors."""

    kind = "internal"
    exit_code = 1


class ConfigError(TravmapError):
    """Bad configuration value or unusable flag combination."""

    kind = "config"
    exit_code = 2


class MissingInputError(TravmapError):
    """A referenced input file or directory does not exist."""

    kind = "missing-file"
    exit_code = 3


class FormatError(TravmapError):
    """A file does not conform to its declared on-disk format."""

    kind = "format"
    exit_code = 4


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(FormatError):
    """File declares a format version this reader does not understand."""


class TruncatedFileError(FormatError):
    """Payload is shorter (or longer) than the header promises."""


class NonFiniteDataError(FormatError):
    """Payload contains NaN or infinite values."""


class ShapeMismatchError(FormatError):
    """Stored shapes are inconsistent with the payload or expectation."""


class DimensionError(TravmapError):
    """Two runtime arrays that must agree in shape do not."""

    kind = "dimension"
    exit_code = 5


class NumericError(TravmapError):
    """A numeric procedure failed (e.g. training loss became non-finite)."""

    kind = "numeric"
    exit_code = 6
