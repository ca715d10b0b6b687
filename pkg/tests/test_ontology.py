import random

import orjson
import pytest

from conftest import make_concept, make_ontology, sid
from meso.errors import OntologyFormatError, OntologyLoadError, UnknownConceptError
from meso.ontology import (
    MESO_ROOT_LABELS,
    ancestors,
    children,
    depth,
    descendants,
    error_pitfalls,
    roots,
    scan_concepts,
    summarize_ontology,
    validate_ontology,
)
from meso.schemas import PitfallCode, Severity, ValidationProfile
from meso.seed import seed_bytes
from meso.store import build_ontology, dump_ontology, load_ontology, parse_ontology_document, save_ontology

EMOTIONAL, ANXIETY, IMPATIENCE = sid(31), sid(32), sid(37)
PHYSICAL, FATIGUE, HEADACHE, RESTLESSNESS = sid(38), sid(39), sid(40), sid(42)
STRESS_RESPONSE, BURNOUT = sid(4), sid(50)


def codes(pitfalls):
    return {p.code for p in pitfalls}


def mutate(seed, number, **update):
    concepts = seed.sorted_concepts()
    return [c.model_copy(update=update) if c.id == sid(number) else c for c in concepts]


# ---------- seed ----------
def test_seed_has_the_eight_top_level_classes(seed):
    labels = {seed.concepts[r].label for r in roots(seed)}
    assert len(roots(seed)) == 8
    assert labels == set(MESO_ROOT_LABELS)


def test_seed_is_clean_under_both_profiles(seed):
    assert validate_ontology(seed, ValidationProfile.MESO) == []
    assert validate_ontology(seed) == []


def test_seed_keeps_restlessness_and_impatience_apart(seed):
    assert seed.concepts[RESTLESSNESS].label == "Restlessness"
    assert seed.concepts[IMPATIENCE].label == "Impatience"
    assert PHYSICAL in ancestors(seed, RESTLESSNESS)
    assert EMOTIONAL in ancestors(seed, IMPATIENCE)
    assert EMOTIONAL not in ancestors(seed, RESTLESSNESS)


def test_seed_canonical_form_round_trips(seed, tmp_path):
    assert dump_ontology(seed) == seed_bytes()
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    save_ontology(seed, first)
    save_ontology(load_ontology(first), second)
    assert first.read_bytes() == second.read_bytes() == seed_bytes()


def test_summary_counts(seed):
    summary = summarize_ontology(seed)
    assert summary.concepts == len(seed.concepts)
    assert summary.roots == 8
    assert summary.max_depth == 2
    assert summary.descendants_per_root["StressResponse"] == len(descendants(seed, STRESS_RESPONSE))
    assert str(summary.cui_coverage_pct) == "100.0"


# ---------- hierarchy ----------
def test_ancestors_walks_to_the_root(seed):
    assert ancestors(seed, ANXIETY) == {EMOTIONAL, STRESS_RESPONSE}
    assert ancestors(seed, STRESS_RESPONSE) == set()


def test_ancestors_through_a_diamond(seed):
    assert seed.concepts[BURNOUT].parent_ids == (EMOTIONAL, PHYSICAL)
    assert ancestors(seed, BURNOUT) == {EMOTIONAL, PHYSICAL, STRESS_RESPONSE}
    assert depth(seed, BURNOUT) == 2


def test_children_and_descendants(seed):
    assert BURNOUT in children(seed, EMOTIONAL)
    assert BURNOUT in children(seed, PHYSICAL)
    assert children(seed, BURNOUT) == []
    below = descendants(seed, STRESS_RESPONSE)
    assert {EMOTIONAL, PHYSICAL, BURNOUT, RESTLESSNESS} <= below
    assert STRESS_RESPONSE not in below


def test_depth_is_longest_path():
    o = make_ontology(
        make_concept(1, "Root"),
        make_concept(2, "Middle", (1,)),
        make_concept(3, "Leaf", (1, 2)),
    )
    assert [depth(o, sid(n)) for n in (1, 2, 3)] == [0, 1, 2]


def test_unknown_concept_is_a_key_error(seed):
    with pytest.raises(UnknownConceptError) as info:
        ancestors(seed, "STRONG:999999")
    assert isinstance(info.value, KeyError)
    with pytest.raises(UnknownConceptError):
        depth(seed, "STRONG:999999")


# ---------- pitfall mutations ----------
def test_cycle_is_reported(seed):
    concepts = mutate(seed, 31, parent_ids=(ANXIETY,))
    pitfalls = scan_concepts(concepts, ValidationProfile.MESO)
    assert codes(pitfalls) == {PitfallCode.CYCLE}
    assert pitfalls[0].subjects == (EMOTIONAL, ANXIETY)
    assert pitfalls[0].severity is Severity.ERROR


def test_dangling_parent_is_reported(seed):
    pitfalls = scan_concepts(mutate(seed, 40, parent_ids=("STRONG:000999",)), ValidationProfile.MESO)
    assert codes(pitfalls) == {PitfallCode.DANGLING_PARENT}
    assert pitfalls[0].subjects == (HEADACHE, "STRONG:000999")


def test_bad_naming_is_reported(seed):
    pitfalls = scan_concepts(mutate(seed, 40, label="tension headache"), ValidationProfile.MESO)
    assert codes(pitfalls) == {PitfallCode.BAD_NAMING}
    assert pitfalls[0].severity is Severity.WARNING


def test_shared_cui_is_reported(seed):
    cui = seed.concepts[FATIGUE].umls_cui
    pitfalls = scan_concepts(mutate(seed, 40, umls_cui=cui), ValidationProfile.MESO)
    assert codes(pitfalls) == {PitfallCode.POSSIBLE_EQUIVALENCE}
    assert pitfalls[0].subjects == (FATIGUE, HEADACHE)


def test_duplicate_label_is_reported(seed):
    pitfalls = scan_concepts(mutate(seed, 40, label="Fatigue"), ValidationProfile.MESO)
    assert [p.code for p in pitfalls] == [PitfallCode.DUP_LABEL, PitfallCode.POSSIBLE_EQUIVALENCE]
    assert all(p.subjects == (FATIGUE, HEADACHE) for p in pitfalls)
    assert pitfalls[1].message == "labels have identical token sets"


def test_duplicate_id_is_reported(seed):
    concepts = seed.sorted_concepts()
    pitfalls = scan_concepts(concepts + [concepts[-1]], ValidationProfile.MESO)
    assert codes(pitfalls) == {PitfallCode.DUP_ID}


def test_missing_annotations_are_reported_separately():
    pitfalls = scan_concepts([make_concept(1, "Stressor", umls_cui=None, definition=None)])
    assert [p.code for p in pitfalls] == [PitfallCode.MISSING_ANNOTATION] * 2
    assert {p.message for p in pitfalls} == {"no UMLS CUI annotation", "no class definition"}
    assert all(p.severity is Severity.SUGGESTION for p in pitfalls)


def test_identical_token_sets_suggest_equivalence():
    pitfalls = scan_concepts([make_concept(1, "WorkStress"), make_concept(2, "StressWork")])
    assert codes(pitfalls) == {PitfallCode.POSSIBLE_EQUIVALENCE}


def test_profile_roots_only_checked_under_meso_profile(seed):
    extra = make_concept(99, "Wellbeing")
    concepts = seed.sorted_concepts() + [extra]
    assert scan_concepts(concepts) == []
    pitfalls = scan_concepts(concepts, ValidationProfile.MESO)
    assert codes(pitfalls) == {PitfallCode.PROFILE_ROOT_MISMATCH}
    assert "unexpected Wellbeing" in pitfalls[0].message


def test_pitfalls_come_back_sorted(seed):
    concepts = mutate(seed, 40, label="tension headache", umls_cui=None)
    pitfalls = scan_concepts(concepts)
    assert [p.code for p in pitfalls] == [PitfallCode.BAD_NAMING, PitfallCode.MISSING_ANNOTATION]


# ---------- loading ----------
def test_load_refuses_error_pitfalls(seed):
    concepts = mutate(seed, 31, parent_ids=(ANXIETY,))
    document = parse_ontology_document(
        orjson.dumps({"name": "x", "version": "1", "concepts": [c.model_dump(mode="json") for c in concepts]})
    )
    with pytest.raises(OntologyLoadError) as info:
        build_ontology(document)
    assert codes(info.value.pitfalls) == {PitfallCode.CYCLE}


def test_load_accepts_warnings():
    document = parse_ontology_document(
        orjson.dumps(
            {"name": "x", "version": "1", "concepts": [make_concept(1, "lower case").model_dump(mode="json")]}
        )
    )
    assert sid(1) in build_ontology(document)


@pytest.mark.parametrize(
    "payload",
    [
        b"not json",
        b'{"name": "x", "version": "1", "concepts": []}',
        b'{"name": "x", "version": "1", "concepts": [{"id": "S1", "label": "A"}]}',
        b'{"name": "x", "version": "1", "concepts": [{"id": "STRONG:000001", "label": "A", "color": "red"}]}',
    ],
)
def test_malformed_documents_are_format_errors(payload):
    with pytest.raises(OntologyFormatError):
        parse_ontology_document(payload)


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(OntologyFormatError):
        load_ontology(tmp_path / "absent.json")


# ---------- random ontologies ----------
WORDS = ("Work", "Stress", "Sleep", "Exam", "Panic", "Grief", "Debt", "Noise", "Burnout", "Coping")


def _random_ontology(rng):
    """Acyclic by construction: parents are drawn from earlier concepts."""
    numbers = rng.sample(range(1, 1000), rng.randint(1, 25))
    concepts = []
    for position, number in enumerate(numbers):
        parents = tuple(rng.sample(numbers[:position], min(position, rng.randint(0, 3))))
        label = "".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))
        fields = {"synonyms": tuple(w.lower() for w in rng.sample(WORDS, rng.randint(0, 2)))}
        if rng.random() < 0.3:
            fields["umls_cui"] = None
        if rng.random() < 0.3:
            fields["definition"] = None
        if rng.random() < 0.2:
            fields["translation_ko"] = "스트레스"
        concepts.append(make_concept(number, label, parents, **fields))
    return make_ontology(*concepts)


def test_random_ontologies_round_trip(tmp_path):
    rng = random.Random(4242)
    path = tmp_path / "o.json"
    for case in range(200):
        o = _random_ontology(rng)
        save_ontology(o, path)
        loaded = load_ontology(path)
        assert loaded == o, case
        assert dump_ontology(loaded) == path.read_bytes()


def test_no_concept_is_its_own_ancestor():
    rng = random.Random(99)
    for case in range(200):
        o = _random_ontology(rng)
        for concept_id in o.concepts:
            above = ancestors(o, concept_id)
            assert concept_id not in above, case
            assert set(o.concepts[concept_id].parent_ids) <= above
            assert all(concept_id in descendants(o, a) for a in above)


def test_validation_is_stable_across_calls_and_round_trips(tmp_path):
    rng = random.Random(7)
    path = tmp_path / "o.json"
    for case in range(100):
        o = _random_ontology(rng)
        for profile in ValidationProfile:
            first = validate_ontology(o, profile)
            assert validate_ontology(o, profile) == first, case
            save_ontology(o, path)
            assert validate_ontology(load_ontology(path), profile) == first, case
            assert error_pitfalls(first) == []
