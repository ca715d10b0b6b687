"""File-backed store helpers: ontology JSON, JSON Lines, review-sheet CSV.

Functions here are thin codecs. They validate shape (via the Pydantic
schemas) and wrap I/O failures in toolkit errors; callers own the business
logic. Every writer goes through ``write_atomic`` so a crashed run never
leaves a half-written output behind.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence, TypeVar, Union

import orjson
from pydantic import BaseModel, ValidationError

from .errors import MesoError, OntologyFormatError, OntologyLoadError, OutputWriteError, ReviewSheetError
from .ontology import error_pitfalls, scan_concepts
from .schemas import ExtractionRecord, Ontology, OntologyDocument, Post, ReviewRow

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]
ModelT = TypeVar("ModelT", bound=BaseModel)

SHEET_HEADER = ["post_id", "category", "item_index", "phrase", "label", "hallucination", "note"]


def write_atomic(path: PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    except OSError as exc:
        raise OutputWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except OSError as exc:
        Path(tmp_name).unlink(missing_ok=True)
        raise OutputWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def _read_bytes(path: PathLike, error: type[MesoError]) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise error(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_text(path: PathLike, error: type[MesoError] = MesoError, encoding: str = "utf-8") -> str:
    """Read and decode a text file; undecodable bytes are reported with their offset."""
    data = _read_bytes(path, error)
    try:
        return data.decode(encoding)
    except UnicodeDecodeError as exc:
        raise error(f"{path}: not valid UTF-8 at byte {exc.start}") from exc


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    location = ".".join(str(part) for part in err["loc"]) or "$"
    return f"{location}: {err['msg']}"


# ---------- ontology ----------
def parse_ontology_document(data: bytes, source: str = "<bytes>") -> OntologyDocument:
    """Strictly parse an ontology document without the structural checks."""
    try:
        payload = orjson.loads(data)
    except orjson.JSONDecodeError as exc:
        raise OntologyFormatError(f"{source}: not valid JSON ({exc})") from exc
    try:
        return OntologyDocument.model_validate(payload)
    except ValidationError as exc:
        raise OntologyFormatError(f"{source}: {_first_error(exc)}") from exc


def read_ontology_document(path: PathLike) -> OntologyDocument:
    return parse_ontology_document(_read_bytes(path, OntologyFormatError), str(path))


def build_ontology(document: OntologyDocument) -> Ontology:
    """Turn a parsed document into an Ontology, refusing Error-level pitfalls."""
    errors = error_pitfalls(scan_concepts(document.concepts))
    if errors:
        raise OntologyLoadError(errors)
    return Ontology(
        name=document.name,
        version=document.version,
        concepts={concept.id: concept for concept in document.concepts},
    )


def load_ontology(path: PathLike) -> Ontology:
    ontology = build_ontology(read_ontology_document(path))
    logger.debug("loaded ontology %s %s (%d concepts)", ontology.name, ontology.version, len(ontology.concepts))
    return ontology


def dump_ontology(o: Ontology) -> bytes:
    """Canonical form: fixed field order, concepts sorted by id, 2-space indent."""
    payload = {
        "name": o.name,
        "version": o.version,
        "concepts": [concept.model_dump(mode="json") for concept in o.sorted_concepts()],
    }
    return orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE)


def save_ontology(o: Ontology, path: PathLike) -> None:
    write_atomic(path, dump_ontology(o))


# ---------- JSON Lines ----------
def read_jsonl(path: PathLike, model: type[ModelT]) -> list[ModelT]:
    """Read one ``model`` per non-blank line; errors name the line number."""
    text = read_text(path)
    items: list[ModelT] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            items.append(model.model_validate(orjson.loads(line)))
        except orjson.JSONDecodeError as exc:
            raise MesoError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
        except ValidationError as exc:
            raise MesoError(f"{path}:{lineno}: {_first_error(exc)}") from exc
    return items


def read_posts(path: PathLike) -> list[Post]:
    posts = read_jsonl(path, Post)
    seen: set[str] = set()
    for post in posts:
        if post.id in seen:
            raise MesoError(f"{path}: duplicate post id {post.id!r}")
        seen.add(post.id)
    return posts


def read_records(path: PathLike) -> list[ExtractionRecord]:
    return read_jsonl(path, ExtractionRecord)


def dump_jsonl(items: Iterable[BaseModel]) -> bytes:
    return b"".join(orjson.dumps(item.model_dump(mode="json")) + b"\n" for item in items)


def dump_json(item: BaseModel) -> bytes:
    return orjson.dumps(item.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE)


# ---------- review sheets ----------
def dump_review_sheet(rows: Sequence[ReviewRow]) -> bytes:
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SHEET_HEADER)
    for row in rows:
        writer.writerow(
            [
                row.post_id,
                row.category.value,
                row.item_index,
                row.phrase,
                row.label.value if row.label else "",
                "true" if row.hallucination else "false",
                row.note or "",
            ]
        )
    return buffer.getvalue().encode("utf-8")


def _parse_sheet_row(raw: dict[str, str]) -> ReviewRow:
    raw = {key: value or "" for key, value in raw.items() if key is not None}
    index_text = raw["item_index"].strip()
    item_index: Union[int, str] = index_text if index_text.startswith("M") else int(index_text)
    flag = raw["hallucination"].strip().lower()
    if flag not in ("", "true", "false"):
        raise ValueError(f"hallucination must be true or false, got {raw['hallucination']!r}")
    return ReviewRow(
        post_id=raw["post_id"],
        category=raw["category"].strip(),
        item_index=item_index,
        phrase=raw["phrase"],
        label=raw["label"].strip() or None,
        hallucination=flag == "true",
        note=raw["note"] or None,
    )


def read_review_sheet(path: PathLike) -> list[ReviewRow]:
    text = read_text(path, ReviewSheetError, "utf-8-sig")
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames != SHEET_HEADER:
        raise ReviewSheetError(f"{path}: header must be {','.join(SHEET_HEADER)}")
    rows = []
    # line 1 is the header
    for lineno, raw in enumerate(reader, start=2):
        try:
            rows.append(_parse_sheet_row(raw))
        except (ValueError, ValidationError) as exc:
            detail = _first_error(exc) if isinstance(exc, ValidationError) else str(exc)
            raise ReviewSheetError(f"{path}:{lineno}: {detail}") from exc
    return rows
