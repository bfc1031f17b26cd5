"""Exception hierarchy shared by every draftkit module."""


class DraftkitError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(DraftkitError, ValueError):
    """Caller passed arguments violating an operation's preconditions."""


class SequenceLengthError(InvalidArgumentError):
    """Token sequence too long (or too short) for the model at hand."""


class DegenerateInputError(DraftkitError):
    """Numerically degenerate input, e.g. a zero-norm vector fed to cosine."""


class NumericError(DraftkitError):
    """A computation produced a non-finite value where finiteness is required."""


class MalformedOutputError(DraftkitError):
    """Generated or supplied output violates the expected structure."""


class IncompleteGenerationError(DraftkitError):
    """Generation budget ran out before the stopping condition was met.

    Carries the partial token sequence in ``partial`` and, when available,
    the decode trace in ``trace``.
    """

    def __init__(self, message, partial=None, trace=None):
        super().__init__(message)
        self.partial = partial
        self.trace = trace


class EmbeddingLookupError(DraftkitError, KeyError):
    """A phrase or token has no embedding; the message names the offender."""

    def __init__(self, phrase):
        super().__init__(f"no embedding for {phrase!r}")
        self.phrase = phrase


class TransportError(DraftkitError):
    """A remote call failed after exhausting the retry budget."""


class ArchiveError(DraftkitError):
    """Persisted archive is unreadable: bad magic, bad checksum, truncation."""


class ConfigError(InvalidArgumentError):
    """Configuration file rejected; the message names the offending key."""


class AnnotationError(DraftkitError):
    """Malformed annotation file; carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
