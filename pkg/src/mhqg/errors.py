"""Exception types shared across the package.

Precondition violations raise plain ValueError; everything listed here is
an operational failure a caller may want to catch by name.
"""


class MhqgError(Exception):
    """Base class for package-specific failures."""


class MalformedInput(MhqgError):
    """Corpus file violates the expected JSON schema."""

    def __init__(self, message: str, record_index: int | None = None):
        self.record_index = record_index
        if record_index is not None:
            message = f"record {record_index}: {message}"
        super().__init__(message)


class DanglingLink(MhqgError):
    """A table cell links to a passage id absent from the context."""

    def __init__(self, passage_id: str, record_index: int | None = None):
        self.passage_id = passage_id
        where = f" (record {record_index})" if record_index is not None else ""
        super().__init__(f"cell links to missing passage {passage_id!r}{where}")


class DuplicatePair(MhqgError):
    """A passage pair references the same passage id twice."""


class IndexOutOfRange(MhqgError, IndexError):
    """Row index outside the table."""


class UnsupportedQuestionForm(MhqgError):
    """No declarative-rewrite rule matches the question; skip the candidate."""


class RejectedGeneration(MhqgError):
    """Backend output failed a local postcondition check."""


class BackendUnavailable(MhqgError):
    """Backend could not be reached after the configured retries."""


class ProtocolError(MhqgError):
    """Backend reply violated the wire schema or a reply-shape contract."""


class UndecidableAnswer(MhqgError):
    """A comparison template has no derivable gold answer; drop it."""


class InvalidGraph(MhqgError):
    """Reasoning graph failed validation."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class ModalityMismatch(MhqgError):
    """Input context type does not match what the graph consumes."""


class UnscoredCandidate(MhqgError):
    """Selection was asked to rank a candidate without a perplexity."""


class InsufficientStructure(MhqgError):
    """Table lacks the columns/rows needed to instantiate a template."""
