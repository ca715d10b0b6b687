"""Exception hierarchy for the toolkit.

Everything raised on purpose derives from ``MesoError`` so the CLI can turn
it into a one-line diagnostic and exit code 1.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional, Sequence

if TYPE_CHECKING:
    from .schemas import InfoCategory, Pitfall


class MesoError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MesoError):
    pass


class OutputWriteError(MesoError):
    """An output file could not be written."""


# ---------- ontology ----------
class OntologyFormatError(MesoError):
    """The ontology document could not be read or does not match the schema."""


class OntologyLoadError(MesoError):
    """The document parsed but has Error-severity pitfalls."""

    def __init__(self, pitfalls: Sequence["Pitfall"]) -> None:
        self.pitfalls = list(pitfalls)
        codes = ", ".join(sorted({p.code.value for p in self.pitfalls}))
        super().__init__(f"ontology refused: {len(self.pitfalls)} error pitfall(s) ({codes})")


class UnknownConceptError(MesoError, KeyError):
    def __init__(self, concept_id: str) -> None:
        self.concept_id = concept_id
        super().__init__(f"unknown concept id {concept_id!r}")

    def __str__(self) -> str:
        return self.args[0]


# ---------- matching ----------
class MatchInputError(MesoError):
    """Keyword list is empty or has duplicates after normalization."""


# ---------- structured model output ----------
class OutputParseError(MesoError):
    """Base class for model outputs that cannot be accepted."""

    retryable = False


class NotJson(OutputParseError):
    retryable = True


class SchemaViolation(OutputParseError):
    retryable = True

    def __init__(self, field: str, detail: str = "") -> None:
        self.field = field
        super().__init__(f"schema violation at {field}" + (f": {detail}" if detail else ""))


class UnknownCategory(OutputParseError):
    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(f"unknown category key {key!r}")


class BadEnumValue(OutputParseError):
    def __init__(self, field: str, value: object, allowed: Sequence[str]) -> None:
        self.field = field
        self.value = value
        self.allowed = tuple(allowed)
        super().__init__(f"{field} must be one of {'|'.join(self.allowed)}, got {value!r}")


class EvidenceGuardViolation(OutputParseError):
    """An item's evidence span does not occur in the post.

    The parser collects these per item instead of raising them.
    """

    def __init__(self, item_index: int, evidence: str, category: Optional["InfoCategory"] = None) -> None:
        self.item_index = item_index
        self.evidence = evidence
        self.category = category
        super().__init__(f"item {item_index}: evidence span not found in post")


# ---------- extraction ----------
class ExtractionError(MesoError):
    pass


class CompletionTransportError(ExtractionError):
    """The completion client could not produce a response."""


class RetriesExhausted(ExtractionError):
    def __init__(self, attempts: int, last_error: Optional[OutputParseError]) -> None:
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"model output still malformed after {attempts} attempt(s): {last_error}")


# ---------- keywords ----------
class EmbeddingError(MesoError):
    pass


class VectorError(MesoError, ValueError):
    pass


# ---------- evaluation ----------
class ReviewSheetError(MesoError):
    pass


class KappaError(MesoError, ValueError):
    pass


class DegenerateKappaError(KappaError):
    """Expected disagreement is zero, so kappa is undefined."""
