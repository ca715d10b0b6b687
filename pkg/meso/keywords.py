"""Embedding-ranked keywords and ontology coverage.

For each document, n-gram candidates are ranked by cosine similarity between
the candidate's embedding and the document's embedding; the top ``k`` are
kept separately for every n-gram length. Keywords from all documents are
pooled, deduplicated on their normalized tokens, and mapped onto the
ontology to measure how much of the vocabulary it covers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import AbstractSet, Iterable, Optional, Sequence, Union

import numpy as np

from .clients import Embedder
from .errors import MesoError, VectorError
from .matcher import category_distribution, map_keywords
from .schemas import CoverageReport, Keyword, Ontology
from .store import read_text
from .text import normalize_term, tokenize

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_NGRAMS = (1, 2, 3)
STOPWORDS_RESOURCE = "stopwords_en.txt"


def load_stopwords(path: Optional[Union[str, Path]] = None) -> frozenset[str]:
    """Read one word per line; ``#`` lines are comments. Defaults to the
    bundled English list."""
    if path is None:
        text = (resources.files("meso") / "data" / STOPWORDS_RESOURCE).read_text(encoding="utf-8")
    else:
        text = read_text(path)
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")
    )


def ngram_candidates(doc: str, n_set: Iterable[int], stopwords: AbstractSet[str] = frozenset()) -> list[str]:
    """Contiguous n-grams of ``doc`` for each n in ``n_set`` (ascending).

    A unigram is dropped when it is a stopword; a longer n-gram only when all
    of its tokens are. Duplicates keep their first position.
    """
    tokens = tokenize(doc)
    seen: dict[str, None] = {}
    for n in sorted(set(n_set)):
        for start in range(len(tokens) - n + 1):
            gram = tokens[start : start + n]
            if all(token in stopwords for token in gram):
                continue
            seen.setdefault(" ".join(gram))
    return list(seen)


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    left = np.asarray(a, dtype=np.float64)
    right = np.asarray(b, dtype=np.float64)
    if left.shape != right.shape or left.ndim != 1:
        raise VectorError(f"dimension mismatch: {left.shape} vs {right.shape}")
    norms = np.linalg.norm(left) * np.linalg.norm(right)
    if norms == 0:
        raise VectorError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(left, right) / norms, -1.0, 1.0))


def top_keywords(
    e: Embedder,
    doc: str,
    k: int = DEFAULT_K,
    n_set: Iterable[int] = DEFAULT_NGRAMS,
    stopwords: AbstractSet[str] = frozenset(),
) -> list[Keyword]:
    """Top ``k`` candidates per n-gram level, grouped by n, best first.

    Ties are broken by the candidate text.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    levels = sorted(set(n_set))
    if not set(levels) <= {1, 2, 3}:
        raise ValueError(f"n-gram lengths must be 1, 2 or 3, got {levels}")

    keywords: list[Keyword] = []
    doc_vector: Optional[np.ndarray] = None
    for n in levels:
        candidates = ngram_candidates(doc, {n}, stopwords)
        if not candidates:
            continue
        if doc_vector is None:
            doc_vector = e.embed(doc)
        scored = sorted(
            ((cosine_similarity(e.embed(text), doc_vector), text) for text in candidates),
            key=lambda pair: (-pair[0], pair[1]),
        )
        keywords.extend(Keyword(text=text, n=n, score=score) for score, text in scored[:k])
    for keyword in keywords:
        logger.debug("keyword %r n=%d score=%.4f", keyword.text, keyword.n, keyword.score)
    return keywords


def pool_keywords(per_doc: Iterable[Sequence[Keyword]]) -> list[str]:
    """Pool keyword texts in sorted order, keeping the first surface form per
    normalized token sequence.

    The result does not depend on the order of the documents.
    """
    seen: dict[tuple[str, ...], str] = {}
    for text in sorted(keyword.text for keywords in per_doc for keyword in keywords):
        key = tuple(normalize_term(text))
        if key:
            seen.setdefault(key, text)
    return list(seen.values())


def coverage_report(
    o: Ontology,
    docs: Sequence[str],
    e: Embedder,
    k: int = DEFAULT_K,
    n_set: Iterable[int] = DEFAULT_NGRAMS,
    stopwords: AbstractSet[str] = frozenset(),
    parallelism: int = 1,
) -> CoverageReport:
    """Pool the top keywords of every document and map them onto ``o``."""
    if not docs:
        raise MesoError("coverage needs at least one document")
    levels = sorted(set(n_set))

    def extract(doc: str) -> list[Keyword]:
        return top_keywords(e, doc, k, levels, stopwords)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            per_doc = list(pool.map(extract, docs))
    else:
        per_doc = [extract(doc) for doc in docs]

    terms = pool_keywords(per_doc)
    logger.info("pooled %d unique keywords from %d document(s)", len(terms), len(docs))
    if terms:
        results, distribution = map_keywords(o, terms)
    else:
        results, distribution = [], category_distribution([])
    return CoverageReport(
        embedder_id=e.embedder_id,
        k=k,
        ngrams=levels,
        documents=len(docs),
        total_keywords=distribution.total,
        distribution=distribution,
        results=results,
    )


def read_documents(directory: Union[str, Path]) -> list[str]:
    """Read every non-hidden file in ``directory`` as UTF-8, sorted by name."""
    root = Path(directory)
    if not root.is_dir():
        raise MesoError(f"{directory} is not a directory")
    paths = sorted(p for p in root.iterdir() if p.is_file() and not p.name.startswith("."))
    try:
        return [path.read_text(encoding="utf-8") for path in paths]
    except (OSError, UnicodeDecodeError) as exc:
        raise MesoError(f"cannot read documents in {directory}: {exc}") from exc
