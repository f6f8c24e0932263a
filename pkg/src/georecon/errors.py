"""Exception hierarchy.

Every error carries a short ``kind`` used by the CLI for its one-line,
machine-parsable failure message.
"""


class GeoreconError(Exception):
    kind = "error"


class ParameterError(GeoreconError, ValueError):
    """A numeric or structural parameter is out of its valid range."""

    kind = "parameter"


class InputError(GeoreconError):
    """Missing or inconsistent input data (files, per-frame maps)."""

    kind = "input"


class DegenerateInputError(GeoreconError, ValueError):
    """Input on which the requested quantity is undefined, e.g. a zero vector."""

    kind = "degenerate"


class FormatError(InputError):
    """A binary file does not match its declared layout."""

    kind = "format"


class SceneSpecError(GeoreconError, ValueError):
    """Invalid synthetic scene description."""

    kind = "spec"


class OutputError(GeoreconError):
    """An output file could not be written."""

    kind = "io"
