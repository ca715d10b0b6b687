"""Stress-ontology toolkit: ontology validation, term mapping, LLM extraction,
keyword coverage and evaluation."""

__version__ = "0.1.0"

__all__ = ["clients", "config", "evaluation", "extraction", "keywords", "matcher", "ontology", "schemas", "seed", "store"]
