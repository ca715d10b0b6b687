"""Human evaluation of extraction output.

Workflow:

1. ``init_review_sheet`` turns extraction records into one unlabeled row per
   item. Reviewers label each row Correct or Incorrect (flagging
   hallucinations) and append ``M<k>`` rows for information the model
   missed.
2. ``score_reviews`` turns an adjudicated sheet into the per-category
   performance matrix.
3. ``weighted_kappa`` measures agreement between two reviewers' raw sheets,
   aligned row by row with ``align_sheets``.
4. ``unmapped_report`` lists extracted phrases the ontology does not cover.
"""

from __future__ import annotations

import logging
from collections import Counter
from typing import Hashable, Literal, Sequence, Union

from .errors import DegenerateKappaError, KappaError, ReviewSheetError
from .schemas import (
    ExtractionRecord,
    InfoCategory,
    MatchCategory,
    MetricsReport,
    ReviewLabel,
    ReviewRow,
    ScoreRow,
    UnmappedCategory,
    UnmappedReport,
    percentage,
)
from .text import normalize_term

logger = logging.getLogger(__name__)

OVERALL = "Overall"
REVIEW_LABELS: tuple[ReviewLabel, ...] = (ReviewLabel.CORRECT, ReviewLabel.INCORRECT, ReviewLabel.MISSED)

KappaWeights = Union[Literal["linear", "quadratic"], Sequence[Sequence[float]]]


# ---------- review sheets ----------
def init_review_sheet(records: Sequence[ExtractionRecord]) -> list[ReviewRow]:
    rows = [
        ReviewRow(post_id=record.post_id, category=item.category, item_index=index, phrase=item.phrase)
        for record in records
        for index, item in enumerate(record.items)
    ]
    return sorted(rows, key=lambda row: row.sort_key)


def check_row(row: ReviewRow) -> ReviewLabel:
    """Return the row's label, enforcing the sheet invariants."""
    where = "/".join(row.key)
    if row.label is None:
        raise ReviewSheetError(f"row {where} is unlabeled")
    if (row.label is ReviewLabel.MISSED) != row.is_missed_row:
        raise ReviewSheetError(f"row {where}: Missed is reserved for reviewer-added M<k> rows")
    if row.hallucination and row.label is not ReviewLabel.INCORRECT:
        raise ReviewSheetError(f"row {where}: a hallucination must be labeled Incorrect")
    return row.label


def score_reviews(rows: Sequence[ReviewRow]) -> MetricsReport:
    """Per-category Correct/Incorrect/Missed counts and percentages.

    Every category gets a row, in declaration order, even when it has no
    reviewed items. The overall row is the column sum.
    """
    counts: dict[InfoCategory, Counter] = {category: Counter() for category in InfoCategory}
    hallucinations: Counter = Counter()
    for row in rows:
        counts[row.category][check_row(row)] += 1
        if row.hallucination:
            hallucinations[row.category] += 1

    score_rows = [
        ScoreRow.from_counts(
            category.value,
            counts[category][ReviewLabel.CORRECT],
            counts[category][ReviewLabel.INCORRECT],
            counts[category][ReviewLabel.MISSED],
            hallucinations[category],
        )
        for category in InfoCategory
    ]
    overall = ScoreRow.from_counts(
        OVERALL,
        sum(row.correct for row in score_rows),
        sum(row.incorrect for row in score_rows),
        sum(row.missed for row in score_rows),
        sum(row.hallucinations for row in score_rows),
    )
    logger.info("scored %d review rows", overall.row_total)
    return MetricsReport(rows=score_rows, overall=overall)


# ---------- agreement ----------
def _weight_matrix(weights: KappaWeights, size: int) -> list[list[float]]:
    if weights == "linear":
        return [[abs(i - j) / (size - 1) for j in range(size)] for i in range(size)]
    if weights == "quadratic":
        return [[(abs(i - j) / (size - 1)) ** 2 for j in range(size)] for i in range(size)]
    if isinstance(weights, str):
        raise KappaError(f"unknown weighting {weights!r}; use linear, quadratic or a matrix")
    matrix = [[float(value) for value in row] for row in weights]
    if len(matrix) != size or any(len(row) != size for row in matrix):
        raise KappaError(f"weight matrix must be {size}x{size}")
    return matrix


def contingency_table(
    a: Sequence[Hashable], b: Sequence[Hashable], categories: Sequence[Hashable]
) -> list[list[int]]:
    """Counts of (a[k], b[k]) pairs, indexed by position in ``categories``."""
    index = {label: position for position, label in enumerate(categories)}
    table = [[0] * len(categories) for _ in categories]
    for left, right in zip(a, b):
        if left not in index or right not in index:
            bad = left if left not in index else right
            raise KappaError(f"label {bad!r} is not one of {list(categories)}")
        table[index[left]][index[right]] += 1
    return table


def weighted_kappa(
    a: Sequence[Hashable],
    b: Sequence[Hashable],
    weights: KappaWeights = "linear",
    categories: Sequence[Hashable] = REVIEW_LABELS,
) -> float:
    """Cohen's weighted kappa with disagreement weights.

                 sum(w * observed)
    kappa = 1 - -------------------
                 sum(w * expected)

    ``observed`` is the joint label distribution, ``expected`` the product of
    the two raters' marginals. Linear weights are ``|i - j| / (C - 1)`` over
    the ordered ``categories``; quadratic weights square them.
    """
    if len(a) != len(b):
        raise KappaError(f"raters labeled different numbers of items ({len(a)} vs {len(b)})")
    if not a:
        raise KappaError("no labels to compare")
    size = len(categories)
    if size < 2:
        raise KappaError("kappa needs at least two categories")
    w = _weight_matrix(weights, size)
    table = contingency_table(a, b, categories)

    total = len(a)
    rows = [sum(row) for row in table]
    cols = [sum(table[i][j] for i in range(size)) for j in range(size)]
    observed = sum(w[i][j] * table[i][j] for i in range(size) for j in range(size)) / total
    expected = sum(w[i][j] * rows[i] * cols[j] for i in range(size) for j in range(size)) / (total * total)
    if expected == 0:
        raise DegenerateKappaError("expected disagreement is zero; kappa is undefined")
    return 1.0 - observed / expected


def align_sheets(a: Sequence[ReviewRow], b: Sequence[ReviewRow]) -> tuple[list[ReviewLabel], list[ReviewLabel]]:
    """Pair up two reviewers' rows by (post_id, category, item_index).

    Rows only one reviewer has are skipped with a warning.
    """
    by_key_a = {row.key: row for row in a}
    by_key_b = {row.key: row for row in b}
    shared = sorted(by_key_a.keys() & by_key_b.keys(), key=lambda key: by_key_a[key].sort_key)
    unaligned = len(by_key_a) + len(by_key_b) - 2 * len(shared)
    if unaligned:
        logger.warning("%d review row(s) appear in only one sheet and are ignored", unaligned)
    labels_a = [check_row(by_key_a[key]) for key in shared]
    labels_b = [check_row(by_key_b[key]) for key in shared]
    return labels_a, labels_b


# ---------- coverage gaps ----------
def unmapped_report(records: Sequence[ExtractionRecord]) -> UnmappedReport:
    """Extracted items with no ontology match, deduplicated per category.

    Durations are numeric and never mapped, so they are counted and set
    aside. Phrases are deduplicated on their normalized tokens, keeping the
    first surface form.
    """
    items = [item for record in records for item in record.items]
    unmapped = [item for item in items if item.match_category is MatchCategory.NONE]
    durations = sum(1 for item in unmapped if item.category is InfoCategory.STRESS_DURATION)

    by_category: list[UnmappedCategory] = []
    for category in InfoCategory:
        if category is InfoCategory.STRESS_DURATION:
            continue
        phrases: dict[tuple[str, ...], str] = {}
        count = 0
        for item in unmapped:
            if item.category is category:
                count += 1
                phrases.setdefault(tuple(normalize_term(item.phrase)), item.phrase)
        if count:
            by_category.append(
                UnmappedCategory(category=category, items=count, unique=len(phrases), phrases=list(phrases.values()))
            )

    mappable = sum(1 for item in items if item.category is not InfoCategory.STRESS_DURATION)
    remaining = len(unmapped) - durations
    return UnmappedReport(
        total_unmapped=len(unmapped),
        duration_excluded=durations,
        remaining=remaining,
        unique_total=sum(entry.unique for entry in by_category),
        by_category=by_category,
        mappable_items=mappable,
        mapped_items=mappable - remaining,
        coverage_pct=percentage(mappable - remaining, mappable, 1),
    )
