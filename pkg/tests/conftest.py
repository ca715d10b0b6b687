from pathlib import Path

import pytest

from meso.schemas import Concept, Ontology, format_concept_id
from meso.seed import seed_meso
from meso.store import read_posts

FIXTURES = Path(__file__).parent / "fixtures"


def make_concept(number: int, label: str, parents: tuple[int, ...] = (), **fields) -> Concept:
    """Concept with a CUI and definition unless the caller overrides them."""
    fields.setdefault("definition", f"Definition of {label}.")
    fields.setdefault("umls_cui", f"C{number:07d}")
    return Concept(
        id=format_concept_id(number),
        label=label,
        parent_ids=tuple(format_concept_id(p) for p in parents),
        **fields,
    )


def make_ontology(*concepts: Concept) -> Ontology:
    return Ontology(name="test", version="0", concepts={c.id: c for c in concepts})


def sid(number: int) -> str:
    return format_concept_id(number)


@pytest.fixture(scope="session")
def seed() -> Ontology:
    return seed_meso()


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def posts():
    return read_posts(FIXTURES / "posts.jsonl")
