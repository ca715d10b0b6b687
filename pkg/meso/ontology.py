"""Hierarchy queries and the pitfall scanner.

The scanner works on a plain sequence of concepts rather than an
``Ontology`` so it can also report the Error-level problems (duplicate ids,
dangling parents, cycles) that stop a document from becoming an
``Ontology`` at all. ``meso.store.load_ontology`` relies on this: a file is
refused exactly when ``scan_concepts`` returns an Error-severity pitfall.
"""

from __future__ import annotations

import logging
import re
from collections import Counter, defaultdict
from graphlib import TopologicalSorter
from itertools import combinations
from typing import Iterable, Sequence

from .errors import UnknownConceptError
from .schemas import (
    PITFALL_SEVERITY,
    Concept,
    Ontology,
    OntologySummary,
    Pitfall,
    PitfallCode,
    Severity,
    ValidationProfile,
    percentage,
)
from .text import content_tokens, normalize_term

logger = logging.getLogger(__name__)

MESO_ROOT_LABELS: tuple[str, ...] = (
    "Stressor",
    "StressMediator",
    "StressAppraisal",
    "StressResponse",
    "StressIntervention",
    "StressCopingStrategy",
    "StressCopingOutcome",
    "StressCharacteristics",
)

_UPPER_CAMEL = re.compile(r"^(?:[A-Z][a-z0-9]*)+$")


# ---------- hierarchy queries ----------
def _require(o: Ontology, concept_id: str) -> Concept:
    try:
        return o.concepts[concept_id]
    except KeyError:
        raise UnknownConceptError(concept_id) from None


def ancestors(o: Ontology, concept_id: str) -> set[str]:
    """Transitive closure over ``parent_ids``, excluding the concept itself."""
    pending = list(_require(o, concept_id).parent_ids)
    seen: set[str] = set()
    while pending:
        parent = pending.pop()
        if parent in seen:
            continue
        seen.add(parent)
        pending.extend(o.concepts[parent].parent_ids)
    seen.discard(concept_id)
    return seen


def roots(o: Ontology) -> list[str]:
    return sorted(cid for cid, concept in o.concepts.items() if concept.is_root)


def children(o: Ontology, concept_id: str) -> list[str]:
    _require(o, concept_id)
    return sorted(cid for cid, concept in o.concepts.items() if concept_id in concept.parent_ids)


def descendants(o: Ontology, concept_id: str) -> set[str]:
    _require(o, concept_id)
    child_map: dict[str, list[str]] = defaultdict(list)
    for cid, concept in o.concepts.items():
        for parent in concept.parent_ids:
            child_map[parent].append(cid)
    pending = list(child_map[concept_id])
    seen: set[str] = set()
    while pending:
        child = pending.pop()
        if child not in seen:
            seen.add(child)
            pending.extend(child_map[child])
    return seen


def depths(o: Ontology) -> dict[str, int]:
    """Longest distance from each concept up to a root (roots are 0)."""
    graph = {cid: concept.parent_ids for cid, concept in o.concepts.items()}
    result: dict[str, int] = {}
    # static_order yields every parent before its children
    for cid in TopologicalSorter(graph).static_order():
        parents = graph[cid]
        result[cid] = 1 + max(result[p] for p in parents) if parents else 0
    return result


def depth(o: Ontology, concept_id: str) -> int:
    _require(o, concept_id)
    return depths(o)[concept_id]


def summarize_ontology(o: Ontology) -> OntologySummary:
    concepts = o.sorted_concepts()
    root_ids = roots(o)
    depth_map = depths(o)
    return OntologySummary(
        name=o.name,
        version=o.version,
        concepts=len(concepts),
        roots=len(root_ids),
        max_depth=max(depth_map.values(), default=0),
        descendants_per_root={o.concepts[r].label: len(descendants(o, r)) for r in root_ids},
        cui_coverage_pct=percentage(sum(1 for c in concepts if c.umls_cui), len(concepts), 1),
        definition_coverage_pct=percentage(sum(1 for c in concepts if c.definition), len(concepts), 1),
    )


# ---------- pitfall scanner ----------
def _pitfall(code: PitfallCode, subjects: Iterable[str], message: str) -> Pitfall:
    return Pitfall(code=code, severity=PITFALL_SEVERITY[code], subjects=tuple(subjects), message=message)


def _strongly_connected(graph: dict[str, tuple[str, ...]]) -> list[list[str]]:
    """Tarjan's algorithm, iterative so deep hierarchies cannot overflow the stack."""
    counter = 0
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    components: list[list[str]] = []

    def visit(node: str) -> None:
        nonlocal counter
        index[node] = low[node] = counter
        counter += 1
        stack.append(node)
        on_stack.add(node)

    for start in sorted(graph):
        if start in index:
            continue
        visit(start)
        work = [(start, iter(graph[start]))]
        while work:
            node, edges = work[-1]
            descended = False
            for target in edges:
                if target not in index:
                    visit(target)
                    work.append((target, iter(graph[target])))
                    descended = True
                    break
                if target in on_stack:
                    low[node] = min(low[node], index[target])
            if descended:
                continue
            work.pop()
            if work:
                caller = work[-1][0]
                low[caller] = min(low[caller], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                components.append(component)
    return components


def _structural(concepts: Sequence[Concept]) -> list[Pitfall]:
    found: list[Pitfall] = []
    id_counts = Counter(c.id for c in concepts)
    for cid, count in id_counts.items():
        if count > 1:
            found.append(_pitfall(PitfallCode.DUP_ID, [cid], f"identifier used by {count} concepts"))

    by_id: dict[str, Concept] = {}
    for concept in concepts:
        by_id.setdefault(concept.id, concept)

    for concept in concepts:
        for parent in concept.parent_ids:
            if parent not in by_id:
                found.append(
                    _pitfall(PitfallCode.DANGLING_PARENT, [concept.id, parent], f"parent {parent} does not exist")
                )

    graph = {
        cid: tuple(p for p in concept.parent_ids if p in by_id) for cid, concept in by_id.items()
    }
    for component in _strongly_connected(graph):
        if len(component) > 1 or component[0] in graph[component[0]]:
            members = sorted(component)
            labels = " -> ".join(by_id[m].label for m in members)
            found.append(_pitfall(PitfallCode.CYCLE, members, f"parent relation loops through {labels}"))
    return found


def _naming(concepts: Sequence[Concept]) -> list[Pitfall]:
    found = [
        _pitfall(PitfallCode.BAD_NAMING, [c.id], f"label {c.label!r} is not UpperCamelCase")
        for c in concepts
        if not _UPPER_CAMEL.match(c.label)
    ]
    groups: dict[tuple[str, ...], set[str]] = defaultdict(set)
    for concept in concepts:
        tokens = tuple(normalize_term(concept.label))
        if tokens:
            groups[tokens].add(concept.id)
    for tokens, ids in groups.items():
        if len(ids) > 1:
            found.append(
                _pitfall(PitfallCode.DUP_LABEL, sorted(ids), f"labels normalize to the same term {' '.join(tokens)!r}")
            )
    return found


def _annotations(concepts: Sequence[Concept]) -> list[Pitfall]:
    found = []
    for concept in concepts:
        if not concept.umls_cui:
            found.append(_pitfall(PitfallCode.MISSING_ANNOTATION, [concept.id], "no UMLS CUI annotation"))
        if not concept.definition:
            found.append(_pitfall(PitfallCode.MISSING_ANNOTATION, [concept.id], "no class definition"))
    return found


def _equivalences(concepts: Sequence[Concept]) -> list[Pitfall]:
    """Precision-biased duplicate detection: shared CUI or identical token sets.

    Pairs with identical normalized labels are reported here as well as
    under DUP_LABEL.
    """
    unique: dict[str, Concept] = {}
    for concept in concepts:
        unique.setdefault(concept.id, concept)
    reasons: dict[tuple[str, str], list[str]] = defaultdict(list)

    by_cui: dict[str, list[str]] = defaultdict(list)
    for concept in unique.values():
        if concept.umls_cui:
            by_cui[concept.umls_cui].append(concept.id)
    for cui, ids in by_cui.items():
        for pair in combinations(sorted(ids), 2):
            reasons[pair].append(f"share UMLS CUI {cui}")

    by_tokens: dict[frozenset[str], list[Concept]] = defaultdict(list)
    for concept in unique.values():
        tokens = content_tokens(normalize_term(concept.label))
        if tokens:
            by_tokens[tokens].append(concept)
    for group in by_tokens.values():
        for left, right in combinations(sorted(group, key=lambda c: c.id), 2):
            reasons[(left.id, right.id)].append("labels have identical token sets")

    return [
        _pitfall(PitfallCode.POSSIBLE_EQUIVALENCE, pair, "; ".join(why))
        for pair, why in reasons.items()
    ]


def _profile_roots(concepts: Sequence[Concept]) -> list[Pitfall]:
    root_concepts = {c.id: c for c in concepts if c.is_root}
    labels = {c.label for c in root_concepts.values()}
    expected = set(MESO_ROOT_LABELS)
    if len(root_concepts) == len(expected) and labels == expected:
        return []
    problems = [f"expected {len(expected)} roots, found {len(root_concepts)}"]
    if missing := sorted(expected - labels):
        problems.append("missing " + ", ".join(missing))
    if unexpected := sorted(labels - expected):
        problems.append("unexpected " + ", ".join(unexpected))
    return [_pitfall(PitfallCode.PROFILE_ROOT_MISMATCH, sorted(root_concepts), "; ".join(problems))]


def _ordering(pitfall: Pitfall) -> tuple[str, str, str]:
    return (pitfall.code.value, pitfall.subjects[0] if pitfall.subjects else "", pitfall.message)


def scan_concepts(
    concepts: Sequence[Concept], profile: ValidationProfile = ValidationProfile.GENERIC
) -> list[Pitfall]:
    """Run every check over ``concepts`` and return the pitfalls in a stable order."""
    found = _structural(concepts) + _naming(concepts) + _annotations(concepts) + _equivalences(concepts)
    if profile is ValidationProfile.MESO:
        found += _profile_roots(concepts)
    found.sort(key=_ordering)
    logger.debug("scanned %d concepts: %d pitfall(s)", len(concepts), len(found))
    return found


def validate_ontology(o: Ontology, profile: ValidationProfile = ValidationProfile.GENERIC) -> list[Pitfall]:
    return scan_concepts(o.sorted_concepts(), profile)


def error_pitfalls(pitfalls: Iterable[Pitfall]) -> list[Pitfall]:
    return [p for p in pitfalls if p.severity is Severity.ERROR]
