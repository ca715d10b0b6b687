"""Map free-text terms onto ontology concepts.

A term and every concept label are reduced to normalized content-token sets
(``meso.text``). The category is decided by set relations, tried in order:

- Exact: the term's set equals a concept's label set or one of its synonym sets
- Broader: some label set is a proper subset of the term's set, i.e. the
  term is more specific than the concept it lands on
- Narrower: the term's set is a proper subset of some label set
- Partial: the sets share at least one token
- None: nothing overlaps

Within a category, candidates are ranked by Jaccard similarity to the term,
then by hierarchy depth (deeper first), then by id.
"""

from __future__ import annotations

import logging
from typing import Sequence

from .errors import MatchInputError
from .ontology import depths
from .schemas import CategoryDistribution, MatchCategory, MatchResult, Ontology, percentage
from .text import jaccard, normalize_term, term_key

__all__ = ["TermMatcher", "category_distribution", "map_keywords", "map_term", "normalize_term"]

logger = logging.getLogger(__name__)


class TermMatcher:
    """Precomputed token sets for one ontology; reuse it across many terms."""

    def __init__(self, ontology: Ontology) -> None:
        self.ontology = ontology
        self._labels: dict[str, frozenset[str]] = {}
        self._synonyms: dict[str, list[frozenset[str]]] = {}
        for cid, concept in sorted(ontology.concepts.items()):
            label = term_key(concept.label)
            # A label with no content tokens can never be compared meaningfully.
            if label:
                self._labels[cid] = label
            self._synonyms[cid] = [key for key in map(term_key, concept.synonyms) if key]
        self._depth = depths(ontology)

    def _ranked(self, term: frozenset[str], candidates: Sequence[str]) -> list[str]:
        return sorted(
            candidates,
            key=lambda cid: (-jaccard(term, self._labels.get(cid, frozenset())), -self._depth[cid], cid),
        )

    def _result(self, text: str, category: MatchCategory, term: frozenset[str], candidates: Sequence[str]) -> MatchResult:
        ranked = self._ranked(term, candidates)
        if category is MatchCategory.EXACT:
            return MatchResult(term=text, category=category, matched_ids=(ranked[0],), score=1.0)
        return MatchResult(
            term=text,
            category=category,
            matched_ids=tuple(ranked),
            score=jaccard(term, self._labels[ranked[0]]),
        )

    def match(self, text: str) -> MatchResult:
        term = term_key(text)
        if not term:
            return MatchResult(term=text, category=MatchCategory.NONE)

        exact = [
            cid
            for cid in self._synonyms
            if self._labels.get(cid) == term or term in self._synonyms[cid]
        ]
        if exact:
            return self._result(text, MatchCategory.EXACT, term, exact)

        broader = [cid for cid, label in self._labels.items() if label < term]
        if broader:
            widest = max(len(self._labels[cid]) for cid in broader)
            broader = [cid for cid in broader if len(self._labels[cid]) == widest]
            return self._result(text, MatchCategory.BROADER, term, broader)

        narrower = [cid for cid, label in self._labels.items() if term < label]
        if narrower:
            return self._result(text, MatchCategory.NARROWER, term, narrower)

        overlap = {cid: len(term & label) for cid, label in self._labels.items() if term & label}
        if overlap:
            best = max(overlap.values())
            partial = [cid for cid, size in overlap.items() if size == best]
            return self._result(text, MatchCategory.PARTIAL, term, partial)

        return MatchResult(term=text, category=MatchCategory.NONE)


def map_term(o: Ontology, term: str) -> MatchResult:
    return TermMatcher(o).match(term)


def category_distribution(results: Sequence[MatchResult]) -> CategoryDistribution:
    """Counts and one-decimal percentages over all five categories."""
    total = len(results)
    counts = {category: 0 for category in MatchCategory}
    for result in results:
        counts[result.category] += 1
    return CategoryDistribution(
        total=total,
        counts=counts,
        percentages={category: percentage(count, total, 1) for category, count in counts.items()},
    )


def map_keywords(o: Ontology, terms: Sequence[str]) -> tuple[list[MatchResult], CategoryDistribution]:
    """Map every term and summarize the category distribution.

    Raises MatchInputError for an empty list or when two terms normalize to
    the same tokens.
    """
    if not terms:
        raise MatchInputError("no keywords to map")
    seen: dict[tuple[str, ...], str] = {}
    for term in terms:
        key = tuple(normalize_term(term))
        if key in seen:
            raise MatchInputError(f"{term!r} duplicates {seen[key]!r} after normalization")
        seen[key] = term

    matcher = TermMatcher(o)
    results = [matcher.match(term) for term in terms]
    distribution = category_distribution(results)
    logger.info(
        "mapped %d keywords: %s",
        distribution.total,
        ", ".join(f"{c.value}={n}" for c, n in distribution.counts.items()),
    )
    return results, distribution
