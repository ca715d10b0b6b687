"""Zero-shot extraction of stress information from narratives.

Flow for one post::

    build_prompt -> client.complete -> parse_llm_output -> map phrases

The model must answer with one JSON document holding six fixed keys (see
``ModelOutput``). Parsing is strict. Malformed JSON and schema violations are
retried with the identical prompt; unknown keys and out-of-range enum values
are not, since a model that invents categories will keep inventing them.

Every item must quote an evidence span that occurs in the post (compared
after whitespace collapse and case folding). Items failing that guard are
dropped one by one and counted in the record's diagnostics; the rest of the
output is kept.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Literal, NamedTuple, Optional, Sequence, Union

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .clients import CompletionClient, MockCompletionClient, prompt_hash, read_canned_responses
from .errors import (
    BadEnumValue,
    EvidenceGuardViolation,
    ExtractionError,
    MesoError,
    NotJson,
    OutputParseError,
    RetriesExhausted,
    SchemaViolation,
    UnknownCategory,
)
from .matcher import TermMatcher
from .schemas import (
    ENUM_VALUES,
    ExtractedItem,
    ExtractionDiagnostics,
    ExtractionRecord,
    GuardViolation,
    InfoCategory,
    MatchCategory,
    Ontology,
    Post,
)
from .text import collapse

logger = logging.getLogger(__name__)

PROMPT_VERSION = "meso-extract-v1"
RESPONSES_FIXTURE = "responses.jsonl"


# ---------- model output schema ----------
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PhraseItem(_Strict):
    phrase: str = Field(min_length=1)
    evidence: str = Field(min_length=1)


class DurationItem(_Strict):
    value_text: str = Field(min_length=1)
    evidence: str = Field(min_length=1)


class OnsetItem(_Strict):
    value: Literal["Sudden", "Gradual"]
    evidence: str = Field(min_length=1)


class TemporalProfileItem(_Strict):
    value: Literal["Acute", "Chronic"]
    evidence: str = Field(min_length=1)


class ModelOutput(_Strict):
    """The JSON document the model must return."""

    stressors: list[PhraseItem]
    stress_responses: list[PhraseItem]
    coping_strategies: list[PhraseItem]
    durations: list[DurationItem]
    onset: Optional[OnsetItem]
    temporal_profile: Optional[TemporalProfileItem]


OUTPUT_KEYS: dict[str, InfoCategory] = {
    "stressors": InfoCategory.STRESSOR,
    "stress_responses": InfoCategory.STRESS_RESPONSE,
    "coping_strategies": InfoCategory.STRESS_COPING_STRATEGY,
    "durations": InfoCategory.STRESS_DURATION,
    "onset": InfoCategory.STRESS_ONSET,
    "temporal_profile": InfoCategory.STRESS_TEMPORAL_PROFILE,
}


# ---------- prompt ----------
_TASK = (
    "You are annotating a personal narrative about mental stress. Extract the "
    "stress information it contains into the six categories defined below."
)

_OUTPUT_CONTRACT = """\
Answer with a single JSON document and nothing else. It must have exactly these keys:
{
  "stressors": [{"phrase": "<concept phrase>", "evidence": "<verbatim quote>"}],
  "stress_responses": [{"phrase": "<concept phrase>", "evidence": "<verbatim quote>"}],
  "coping_strategies": [{"phrase": "<concept phrase>", "evidence": "<verbatim quote>"}],
  "durations": [{"value_text": "<how long>", "evidence": "<verbatim quote>"}],
  "onset": {"value": "Sudden" or "Gradual", "evidence": "<verbatim quote>"} or null,
  "temporal_profile": {"value": "Acute" or "Chronic", "evidence": "<verbatim quote>"} or null
}"""

_EVIDENCE_RULES = (
    "Every item must quote its evidence verbatim from the narrative. Use a short "
    "noun phrase, preferably a concept label from the inventory, as the phrase. "
    "If the narrative does not mention a category, return an empty list (or null "
    "for onset and temporal_profile). Never invent an item that the narrative "
    "does not support."
)

_HELP_SEEKING = (
    "Help-seeking is a coping strategy only when the author explicitly asks "
    "others for advice or support; venting about a situation is not help-seeking."
)


def build_prompt(o: Ontology, post_text: str) -> str:
    """Render the extraction prompt. Identical inputs give identical bytes."""
    if not post_text.strip():
        raise ExtractionError("post text is empty")
    definitions = "\n".join(f"- {category.value}: {category.description}" for category in InfoCategory)
    enumerations = "\n".join(
        f"- {category.value}: {' or '.join(values)}" for category, values in ENUM_VALUES.items()
    )
    inventory = "\n".join(f"{concept.id}\t{concept.label}" for concept in o.sorted_concepts())
    blocks = [
        ("Task", _TASK),
        ("Categories", definitions),
        ("Allowed values", enumerations),
        ("Concept inventory", inventory),
        ("Output format", _OUTPUT_CONTRACT),
        ("Evidence", _EVIDENCE_RULES),
        ("Help-seeking", _HELP_SEEKING),
        ("Narrative", post_text),
    ]
    return "\n\n".join(f"## {title}\n{body}" for title, body in blocks) + "\n"


# ---------- parsing ----------
class ParsedOutput(NamedTuple):
    items: list[ExtractedItem]
    violations: list[EvidenceGuardViolation]


def _validation_error(exc: ValidationError) -> OutputParseError:
    errors = exc.errors()
    for err in errors:
        loc = err["loc"]
        if err["type"] == "literal_error" and loc[0] in ("onset", "temporal_profile"):
            category = OUTPUT_KEYS[str(loc[0])]
            return BadEnumValue(".".join(map(str, loc)), err.get("input"), ENUM_VALUES[category])
    err = errors[0]
    return SchemaViolation(".".join(map(str, err["loc"])) or "$", err["msg"])


def _flatten(output: ModelOutput) -> list[tuple[InfoCategory, str, str, Optional[str]]]:
    """(category, phrase, evidence, enum_value) in output-key order.

    Onset and temporal-profile values become the phrases "sudden onset",
    "chronic stress" and so on, which name the matching ontology classes.
    """
    flat = []
    for key in ("stressors", "stress_responses", "coping_strategies"):
        flat.extend((OUTPUT_KEYS[key], item.phrase, item.evidence, None) for item in getattr(output, key))
    flat.extend((InfoCategory.STRESS_DURATION, item.value_text, item.evidence, None) for item in output.durations)
    if output.onset is not None:
        onset = output.onset
        flat.append((InfoCategory.STRESS_ONSET, f"{onset.value.lower()} onset", onset.evidence, onset.value))
    if output.temporal_profile is not None:
        profile = output.temporal_profile
        flat.append(
            (InfoCategory.STRESS_TEMPORAL_PROFILE, f"{profile.value.lower()} stress", profile.evidence, profile.value)
        )
    return flat


def evidence_supported(evidence: str, post_text: str) -> bool:
    needle = collapse(evidence)
    return bool(needle) and needle in collapse(post_text)


def parse_llm_output(raw: str, post_text: str) -> ParsedOutput:
    """Strictly parse one model answer and apply the evidence guard.

    Raises NotJson, SchemaViolation, UnknownCategory or BadEnumValue for the
    document as a whole. Items whose evidence is not in ``post_text`` come
    back in ``violations`` (indexed in the flattened output order) instead
    of ``items``.
    """
    try:
        document = orjson.loads(raw)
    except orjson.JSONDecodeError as exc:
        raise NotJson(f"model output is not JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaViolation("$", "expected a JSON object")
    unknown = sorted(key for key in document if key not in OUTPUT_KEYS)
    if unknown:
        raise UnknownCategory(unknown[0])
    try:
        output = ModelOutput.model_validate(document)
    except ValidationError as exc:
        raise _validation_error(exc) from exc

    items: list[ExtractedItem] = []
    violations: list[EvidenceGuardViolation] = []
    for index, (category, phrase, evidence, enum_value) in enumerate(_flatten(output)):
        if not evidence_supported(evidence, post_text):
            violations.append(EvidenceGuardViolation(index, evidence, category))
            continue
        items.append(ExtractedItem(category=category, evidence_span=evidence, phrase=phrase, enum_value=enum_value))
    return ParsedOutput(items, violations)


# ---------- orchestration ----------
def post_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _attach_mapping(item: ExtractedItem, matcher: TermMatcher) -> ExtractedItem:
    if item.category is InfoCategory.STRESS_DURATION:
        return item
    result = matcher.match(item.phrase)
    if result.category is MatchCategory.NONE:
        return item
    return item.model_copy(update={"mapped_concept": result.best_id, "match_category": result.category})


def extract_post(
    client: CompletionClient,
    o: Ontology,
    post_id: str,
    post_text: str,
    retries: int = 2,
    matcher: Optional[TermMatcher] = None,
) -> ExtractionRecord:
    """Run one post through the model and map the surviving items.

    Transport failures propagate as CompletionTransportError; malformed output
    that survives ``retries`` extra attempts raises RetriesExhausted.
    """
    if retries < 0:
        raise ExtractionError("retries must be >= 0")
    prompt = build_prompt(o, post_text)
    logger.debug("post %s: prompt %s", post_id, prompt_hash(prompt)[:12])

    parsed: Optional[ParsedOutput] = None
    last_error: Optional[OutputParseError] = None
    attempts = 0
    while parsed is None:
        if attempts > retries:
            raise RetriesExhausted(attempts, last_error)
        attempts += 1
        raw = client.complete(prompt)
        try:
            parsed = parse_llm_output(raw, post_text)
        except OutputParseError as exc:
            if not exc.retryable:
                raise
            last_error = exc
            logger.warning("post %s: attempt %d rejected (%s)", post_id, attempts, exc)

    if parsed.violations:
        logger.warning(
            "post %s: dropped %d item(s) whose evidence is not in the post", post_id, len(parsed.violations)
        )
    matcher = matcher or TermMatcher(o)
    return ExtractionRecord(
        post_id=post_id,
        post_hash=post_hash(post_text),
        items=[_attach_mapping(item, matcher) for item in parsed.items],
        model_id=client.model_id,
        prompt_version=PROMPT_VERSION,
        diagnostics=ExtractionDiagnostics(
            attempts=attempts,
            guard_violations=[
                GuardViolation(item_index=v.item_index, category=v.category, evidence=v.evidence)
                for v in parsed.violations
            ],
        ),
    )


def extract_batch(
    client: CompletionClient,
    o: Ontology,
    posts: Sequence[Post],
    parallelism: int = 1,
    retries: int = 2,
) -> list[ExtractionRecord]:
    """Extract every post; results keep input order whatever the parallelism.

    A post that fails yields a record with ``error`` set and no items.
    """
    if parallelism < 1:
        raise ExtractionError("parallelism must be >= 1")
    matcher = TermMatcher(o)

    def run(post: Post) -> ExtractionRecord:
        try:
            return extract_post(client, o, post.id, post.text, retries=retries, matcher=matcher)
        except MesoError as exc:
            logger.warning("post %s failed: %s", post.id, exc)
            return ExtractionRecord(
                post_id=post.id,
                post_hash=post_hash(post.text),
                model_id=client.model_id,
                prompt_version=PROMPT_VERSION,
                diagnostics=ExtractionDiagnostics(attempts=getattr(exc, "attempts", 0)),
                error=str(exc),
            )

    if parallelism == 1:
        records = [run(post) for post in posts]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(run, posts))
    failed = sum(1 for record in records if record.error)
    logger.info("extracted %d post(s), %d failed", len(records), failed)
    return records


def mock_client_from_fixtures(
    fixtures: Union[str, Path], o: Ontology, posts: Sequence[Post], model_id: str = "mock"
) -> MockCompletionClient:
    """Key canned responses by the hash of each post's prompt.

    ``fixtures`` is a ``responses.jsonl`` file or a directory holding one.
    Posts with no canned entry are left out, so extracting them fails as a
    transport error.
    """
    path = Path(fixtures)
    if path.is_dir():
        path = path / RESPONSES_FIXTURE
    canned = read_canned_responses(path)
    responses = {
        prompt_hash(build_prompt(o, post.text)): canned[post.id] for post in posts if post.id in canned
    }
    return MockCompletionClient(responses, model_id=model_id)
