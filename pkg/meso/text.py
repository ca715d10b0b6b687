"""Lexical normalization shared by the matcher, the pitfall scanner and the
keyword pipeline."""

from __future__ import annotations

import re
from typing import Iterable

# Ignored when comparing token sets.
STOP_TOKENS = frozenset({"a", "an", "the", "of", "to", "and", "or"})

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_NON_WORD = re.compile(r"[^a-z0-9]+")


def singularize(token: str) -> str:
    """Strip plural suffixes; the first matching rule wins."""
    if token.endswith("ies"):
        return token[:-3] + "y"
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith(("xes", "ches", "shes")):
        return token[:-2]
    if token.endswith("ss"):
        return token
    if token.endswith("s"):
        return token[:-1]
    return token


def normalize_term(text: str) -> list[str]:
    """Split CamelCase, lowercase, strip punctuation and singularize.

    >>> normalize_term("StressResponse")
    ['stress', 'response']
    >>> normalize_term("worries")
    ['worry']
    """
    spaced = _CAMEL_BOUNDARY.sub(" ", text).lower()
    tokens = (singularize(token) for token in _NON_WORD.sub(" ", spaced).split())
    return [token for token in tokens if token]


def content_tokens(tokens: Iterable[str]) -> frozenset[str]:
    return frozenset(token for token in tokens if token not in STOP_TOKENS)


def term_key(text: str) -> frozenset[str]:
    """Normalized content-token set of ``text``."""
    return content_tokens(normalize_term(text))


def jaccard(left: frozenset[str], right: frozenset[str]) -> float:
    union = left | right
    if not union:
        return 0.0
    return len(left & right) / len(union)


def collapse(text: str) -> str:
    """Whitespace-collapsed, case-folded form used by the evidence guard."""
    return " ".join(text.split()).casefold()


_WORD = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; punctuation and whitespace separate them."""
    return _WORD.findall(text.lower())
