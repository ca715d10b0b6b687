"""Bundled seed ontology.

The package ships a desk-scale subset of the stress ontology in
``meso/data/seed_meso.json``:

- the eight top-level classes (Stressor, StressMediator, StressAppraisal,
  StressResponse, StressIntervention, StressCopingStrategy,
  StressCopingOutcome, StressCharacteristics);
- descendant classes drawn from the stress literature, with Restlessness
  (a physical response) and Impatience (an emotional one) kept as distinct
  classes;
- every class carries a definition and a UMLS annotation block.

The CUIs in the seed are placeholders in the ``C9xxxxxx`` range, which the
UMLS does not assign. Replace them with licensed Metathesaurus lookups before
using the seed for interoperability work.

The file is in canonical form, so ``meso seed --out`` and ``save_ontology``
reproduce it byte for byte.
"""

from __future__ import annotations

from importlib import resources

from .schemas import Ontology
from .store import build_ontology, parse_ontology_document

SEED_RESOURCE = "seed_meso.json"


def seed_bytes() -> bytes:
    return (resources.files("meso") / "data" / SEED_RESOURCE).read_bytes()


def seed_meso() -> Ontology:
    """Return a fresh copy of the bundled seed ontology."""
    return build_ontology(parse_ontology_document(seed_bytes(), source=SEED_RESOURCE))
