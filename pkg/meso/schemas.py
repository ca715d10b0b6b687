"""Domain schemas for the stress-ontology toolkit.

Every value that crosses a module boundary or a file boundary is a Pydantic
model defined here: ontology concepts, pitfalls, match results, extraction
records, keywords, review rows and the metric reports. Models that are read
from user-supplied files use ``extra="forbid"`` so unknown fields are
rejected instead of silently dropped.

Keep I/O and business logic out of this file; the codecs live in
``meso.store`` and the algorithms in their own modules.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, StringConstraints, field_validator, model_validator


ConceptId = Annotated[str, StringConstraints(pattern=r"^STRONG:\d{6}$")]
UmlsCui = Annotated[str, StringConstraints(pattern=r"^C\d{7}$")]
MissedMarker = Annotated[str, StringConstraints(pattern=r"^M\d+$")]


def format_concept_id(number: int) -> str:
    """Return the canonical ``STRONG:NNNNNN`` identifier for ``number``."""
    return f"STRONG:{number:06d}"


def percentage(count: int, total: int, places: int) -> Decimal:
    """Return ``100 * count / total`` rounded half-up to ``places`` decimals.

    A zero ``total`` yields zero rather than raising, so empty report rows
    still print as ``0.00``.
    """
    quantum = Decimal(1).scaleb(-places)
    if total == 0:
        return Decimal(0).quantize(quantum)
    return (Decimal(100 * count) / Decimal(total)).quantize(quantum, rounding=ROUND_HALF_UP)


# -------- Ontology --------
class Concept(BaseModel):
    """One annotated class of the stress ontology.

    - ``id`` is the STRONG identifier, ``label`` the class name
    - ``parent_ids`` is empty for top-level classes
    - ``synonyms`` extend exact matching in the term matcher
    - the ``umls_*`` fields, ``translation_ko`` and ``source_language`` are
      annotations; ``definition`` backs the missing-definition check
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: ConceptId
    label: str = Field(min_length=1)
    parent_ids: tuple[ConceptId, ...] = ()
    synonyms: tuple[str, ...] = ()
    definition: Optional[str] = None
    umls_cui: Optional[UmlsCui] = None
    umls_preferred_name: Optional[str] = None
    umls_semantic_type: Optional[str] = None
    translation_ko: Optional[str] = None
    source_language: Optional[str] = None

    @field_validator("parent_ids")
    @classmethod
    def _unique_parents(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        if len(set(value)) != len(value):
            raise ValueError("parent_ids contains duplicates")
        return value

    @property
    def is_root(self) -> bool:
        return not self.parent_ids


class OntologyDocument(BaseModel):
    """On-disk shape of an ontology file, before structural checks run."""

    model_config = ConfigDict(extra="forbid")

    name: str
    version: str
    concepts: list[Concept] = Field(min_length=1)


class Ontology(BaseModel):
    """A loaded ontology: concepts keyed by id.

    Instances are only built by ``meso.store.load_ontology`` or by callers
    that already ran the Error-level checks, and are treated as read-only.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    version: str
    concepts: dict[ConceptId, Concept]

    def __contains__(self, concept_id: object) -> bool:
        return concept_id in self.concepts

    def sorted_concepts(self) -> list[Concept]:
        return [self.concepts[key] for key in sorted(self.concepts)]


class PitfallCode(str, Enum):
    CYCLE = "CYCLE"
    DANGLING_PARENT = "DANGLING_PARENT"
    DUP_ID = "DUP_ID"
    DUP_LABEL = "DUP_LABEL"
    BAD_NAMING = "BAD_NAMING"
    MISSING_ANNOTATION = "MISSING_ANNOTATION"
    POSSIBLE_EQUIVALENCE = "POSSIBLE_EQUIVALENCE"
    PROFILE_ROOT_MISMATCH = "PROFILE_ROOT_MISMATCH"


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"
    SUGGESTION = "Suggestion"


PITFALL_SEVERITY: dict[PitfallCode, Severity] = {
    PitfallCode.CYCLE: Severity.ERROR,
    PitfallCode.DANGLING_PARENT: Severity.ERROR,
    PitfallCode.DUP_ID: Severity.ERROR,
    PitfallCode.BAD_NAMING: Severity.WARNING,
    PitfallCode.DUP_LABEL: Severity.WARNING,
    PitfallCode.MISSING_ANNOTATION: Severity.SUGGESTION,
    PitfallCode.POSSIBLE_EQUIVALENCE: Severity.SUGGESTION,
    PitfallCode.PROFILE_ROOT_MISMATCH: Severity.SUGGESTION,
}


class ValidationProfile(str, Enum):
    GENERIC = "generic"
    MESO = "meso"


class Pitfall(BaseModel):
    """A structural or annotation defect found by the pitfall scanner."""

    model_config = ConfigDict(frozen=True)

    code: PitfallCode
    severity: Severity
    subjects: tuple[str, ...]
    message: str

    @model_validator(mode="after")
    def _severity_matches_code(self) -> "Pitfall":
        if PITFALL_SEVERITY[self.code] is not self.severity:
            raise ValueError(f"{self.code.value} must have severity {PITFALL_SEVERITY[self.code].value}")
        return self

    def __str__(self) -> str:
        subjects = ", ".join(self.subjects)
        return f"[{self.severity.value}] {self.code.value} ({subjects}): {self.message}"


class OntologySummary(BaseModel):
    """Shape statistics printed by ``meso validate`` and ``meso seed``."""

    name: str
    version: str
    concepts: int
    roots: int
    max_depth: int
    descendants_per_root: dict[str, int]
    cui_coverage_pct: Decimal
    definition_coverage_pct: Decimal


# -------- Term matching --------
class MatchCategory(str, Enum):
    """Semantic-equivalence category, best first."""

    EXACT = "Exact"
    BROADER = "Broader"
    NARROWER = "Narrower"
    PARTIAL = "Partial"
    NONE = "None"


class MatchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    term: str
    category: MatchCategory
    matched_ids: tuple[ConceptId, ...] = ()
    score: float = Field(default=0.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _category_consistent(self) -> "MatchResult":
        if (self.category is MatchCategory.NONE) != (not self.matched_ids):
            raise ValueError("category None must coincide with an empty matched_ids")
        if self.category is MatchCategory.EXACT and len(self.matched_ids) != 1:
            raise ValueError("an Exact match names exactly one concept")
        return self

    @property
    def best_id(self) -> Optional[str]:
        return self.matched_ids[0] if self.matched_ids else None


class CategoryDistribution(BaseModel):
    """Counts and one-decimal percentages per MatchCategory."""

    total: int
    counts: dict[MatchCategory, int]
    percentages: dict[MatchCategory, Decimal]


class MappedTerm(MatchResult):
    """A match result plus the label of each matched concept, aligned with ``matched_ids``."""

    matched_labels: tuple[str, ...] = ()


class MappingReport(BaseModel):
    distribution: CategoryDistribution
    results: list[MappedTerm]


# -------- Extraction --------
class InfoCategory(str, Enum):
    """The six kinds of stress information pulled out of a narrative."""

    STRESSOR = "Stressor"
    STRESS_RESPONSE = "StressResponse"
    STRESS_COPING_STRATEGY = "StressCopingStrategy"
    STRESS_DURATION = "StressDuration"
    STRESS_ONSET = "StressOnset"
    STRESS_TEMPORAL_PROFILE = "StressTemporalProfile"

    @property
    def description(self) -> str:
        return CATEGORY_DESCRIPTIONS[self]

    @property
    def order(self) -> int:
        return list(InfoCategory).index(self)


CATEGORY_DESCRIPTIONS: dict[InfoCategory, str] = {
    InfoCategory.STRESSOR: "Source or causes of stress",
    InfoCategory.STRESS_RESPONSE: "Mental, emotional, physical, or behavioral reaction to stress",
    InfoCategory.STRESS_COPING_STRATEGY: "The methods used to manage stress",
    InfoCategory.STRESS_DURATION: "How long the stress lasts",
    InfoCategory.STRESS_ONSET: "The manner in which stress begins – sudden or gradual",
    InfoCategory.STRESS_TEMPORAL_PROFILE: "The overall pattern of stress - acute or chronic",
}

ENUM_VALUES: dict[InfoCategory, tuple[str, ...]] = {
    InfoCategory.STRESS_ONSET: ("Sudden", "Gradual"),
    InfoCategory.STRESS_TEMPORAL_PROFILE: ("Acute", "Chronic"),
}


class ExtractedItem(BaseModel):
    """One piece of stress information with its evidence and mapping."""

    model_config = ConfigDict(frozen=True)

    category: InfoCategory
    evidence_span: str = Field(min_length=1)
    phrase: str
    enum_value: Optional[str] = None
    mapped_concept: Optional[ConceptId] = None
    match_category: MatchCategory = MatchCategory.NONE

    @model_validator(mode="after")
    def _category_rules(self) -> "ExtractedItem":
        allowed = ENUM_VALUES.get(self.category)
        if allowed is None and self.enum_value is not None:
            raise ValueError(f"{self.category.value} items carry no enum_value")
        if allowed is not None and self.enum_value not in allowed:
            raise ValueError(f"{self.category.value} enum_value must be one of {allowed}")
        if self.category is InfoCategory.STRESS_DURATION and (
            self.mapped_concept is not None or self.match_category is not MatchCategory.NONE
        ):
            raise ValueError("durations are not mapped to the ontology")
        if (self.mapped_concept is None) != (self.match_category is MatchCategory.NONE):
            raise ValueError("mapped_concept is set exactly when match_category is not None")
        return self


class GuardViolation(BaseModel):
    """An item dropped because its evidence span is not in the post."""

    item_index: int
    category: InfoCategory
    evidence: str


class ExtractionDiagnostics(BaseModel):
    attempts: int = 0
    guard_violations: list[GuardViolation] = []


class ExtractionRecord(BaseModel):
    """Structured output for one post.

    ``error`` is set (and ``items`` empty) when the post failed inside a
    batch; the batch itself never fails on a single post.
    """

    post_id: str
    post_hash: str
    items: list[ExtractedItem] = []
    model_id: str
    prompt_version: str
    diagnostics: ExtractionDiagnostics = Field(default_factory=ExtractionDiagnostics)
    error: Optional[str] = None

    @model_validator(mode="after")
    def _single_valued_categories(self) -> "ExtractionRecord":
        for category in ENUM_VALUES:
            if sum(1 for item in self.items if item.category is category) > 1:
                raise ValueError(f"at most one {category.value} item per record")
        return self


class Post(BaseModel):
    """One line of the posts input file."""

    model_config = ConfigDict(extra="forbid")

    id: str = Field(min_length=1)
    text: str = Field(min_length=1)


# -------- Keyword coverage --------
class Keyword(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    n: Literal[1, 2, 3]
    score: float = Field(ge=-1.0, le=1.0)


class CoverageReport(BaseModel):
    embedder_id: str
    k: int
    ngrams: list[int]
    documents: int
    total_keywords: int
    distribution: CategoryDistribution
    results: list[MatchResult]


# -------- Evaluation --------
class ReviewLabel(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    MISSED = "Missed"


class ReviewRow(BaseModel):
    """One line of a review sheet.

    ``item_index`` is the item's position in its record, or an ``M<k>``
    marker for rows a reviewer appended for information the model missed.
    ``label`` is ``None`` until a reviewer fills it in.
    """

    model_config = ConfigDict(extra="forbid")

    post_id: str
    category: InfoCategory
    item_index: Union[int, MissedMarker]
    phrase: str = ""
    label: Optional[ReviewLabel] = None
    hallucination: bool = False
    note: Optional[str] = None

    @property
    def is_missed_row(self) -> bool:
        return isinstance(self.item_index, str)

    @property
    def sort_key(self) -> tuple[str, int, int, int]:
        if isinstance(self.item_index, str):
            return (self.post_id, self.category.order, 1, int(self.item_index[1:]))
        return (self.post_id, self.category.order, 0, self.item_index)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.post_id, self.category.value, str(self.item_index))


class ScoreRow(BaseModel):
    """One row of the performance matrix."""

    category: str
    correct: int
    incorrect: int
    missed: int
    row_total: int
    correct_pct: Decimal
    incorrect_pct: Decimal
    missed_pct: Decimal
    error_rate_pct: Decimal
    hallucinations: int

    @classmethod
    def from_counts(cls, category: str, correct: int, incorrect: int, missed: int, hallucinations: int) -> "ScoreRow":
        total = correct + incorrect + missed
        return cls(
            category=category,
            correct=correct,
            incorrect=incorrect,
            missed=missed,
            row_total=total,
            correct_pct=percentage(correct, total, 2),
            incorrect_pct=percentage(incorrect, total, 2),
            missed_pct=percentage(missed, total, 2),
            error_rate_pct=percentage(incorrect + missed, total, 2),
            hallucinations=hallucinations,
        )


class MetricsReport(BaseModel):
    rows: list[ScoreRow]
    overall: ScoreRow
    kappa: Optional[float] = None
    kappa_weights: Optional[str] = None

    def row(self, category: InfoCategory) -> ScoreRow:
        for row in self.rows:
            if row.category == category.value:
                return row
        raise KeyError(category.value)


class UnmappedCategory(BaseModel):
    category: InfoCategory
    items: int
    unique: int
    phrases: list[str]


class UnmappedReport(BaseModel):
    """Items no ontology concept covers, deduplicated per category."""

    total_unmapped: int
    duration_excluded: int
    remaining: int
    unique_total: int
    by_category: list[UnmappedCategory]
    mappable_items: int
    mapped_items: int
    coverage_pct: Decimal
