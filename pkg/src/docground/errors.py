"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError (and subclasses) -> 2, TransportError -> 3, ReplayMissError -> 4.
"""


class DocgroundError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DocgroundError):
    """Invalid configuration: bad flags, missing settings, shape mismatches."""


class DataError(DocgroundError):
    """Base class for corpus / file-content problems."""


class CorpusFormatError(DataError):
    """A corpus line could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    """Parsed data violates an invariant (dangling refs, bad ranges, ...)."""


class TrainingError(DataError):
    """Training aborted, e.g. on a non-finite loss."""


class TransportError(DocgroundError):
    """A network query failed after exhausting retries."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class ReplayMissError(DocgroundError):
    """A transcript lookup failed; signals prompt or image drift."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)
