"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TarkitError(Exception):
    """Base class for every error raised by tarkit."""


class ValidationError(TarkitError, ValueError):
    pass


class InvalidKeyFormat(ValidationError):
    """A timestamp key does not follow the strict key grammar."""

    def __init__(self, text: str, reason: str) -> None:
        super().__init__(f"{reason}: {text!r}")
        self.text = text
        self.reason = reason


class InvalidFormat(InvalidKeyFormat):
    pass


class TrailingGarbage(InvalidKeyFormat):
    pass


class InvertedRange(InvalidKeyFormat):
    pass


class FieldOverflow(InvalidKeyFormat):
    pass


class DuplicateKey(ValidationError):
    pass


class EmptySentence(ValidationError):
    pass


class OutOfOrder(ValidationError):
    pass


class SchemaError(ValidationError):
    def __init__(self, line: int | None, field: str | None, message: str) -> None:
        where = f"line {line}" if line is not None else "record"
        if field:
            where += f", field {field!r}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field
        self.message = message


class JudgeError(TarkitError):
    pass


class MissingField(JudgeError, ValueError):
    pass


class TransportError(JudgeError):
    """The judge endpoint could not be reached or kept failing."""


class ReplayMiss(JudgeError):
    def __init__(self, key: str) -> None:
        super().__init__(f"no replay fixture for request {key}")
        self.key = key


class MalformedReply(JudgeError):
    def __init__(self, reason: str, raw_text: str) -> None:
        super().__init__(reason)
        self.reason = reason
        self.raw_text = raw_text


class EmbeddingError(TarkitError):
    pass


class ProviderUnavailable(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError, ValueError):
    pass


class ZeroVector(EmbeddingError, ValueError):
    pass


class MissingReference(TarkitError):
    pass


class GroupTooSmall(TarkitError, ValueError):
    pass


class EmptyCorpus(TarkitError, ValueError):
    pass


class LengthMismatch(TarkitError, ValueError):
    pass


class ZeroVariance(TarkitError, ValueError):
    pass
