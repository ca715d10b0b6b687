import itertools
import random
from decimal import Decimal

import pytest

from conftest import sid
from meso.errors import DegenerateKappaError, KappaError, ReviewSheetError
from meso.evaluation import (
    REVIEW_LABELS,
    align_sheets,
    contingency_table,
    init_review_sheet,
    score_reviews,
    unmapped_report,
    weighted_kappa,
)
from meso.schemas import (
    ExtractedItem,
    ExtractionRecord,
    InfoCategory,
    MatchCategory,
    ReviewLabel,
    ReviewRow,
)
from meso.store import read_records, read_review_sheet
from meso.text import normalize_term

C, I, M = ReviewLabel.CORRECT, ReviewLabel.INCORRECT, ReviewLabel.MISSED


def record(post_id, *items):
    return ExtractionRecord(post_id=post_id, post_hash="0" * 64, items=list(items), model_id="mock", prompt_version="v")


def item(category, phrase, mapped=None):
    return ExtractedItem(
        category=category,
        evidence_span=phrase,
        phrase=phrase,
        enum_value={"sudden onset": "Sudden"}.get(phrase),
        mapped_concept=mapped,
        match_category=MatchCategory.EXACT if mapped else MatchCategory.NONE,
    )


def row(post_id, category, index, label, hallucination=False):
    return ReviewRow(post_id=post_id, category=category, item_index=index, label=label, hallucination=hallucination)


# ---------- performance matrix ----------
def test_fixture_sheet_scores(fixtures_dir):
    report = score_reviews(read_review_sheet(fixtures_dir / "adjudicated_sheet.csv"))
    expected = {
        InfoCategory.STRESSOR: (39, 0, 9, "81.25", "0.00", "18.75"),
        InfoCategory.STRESS_RESPONSE: (55, 8, 8, "77.46", "11.27", "11.27"),
        InfoCategory.STRESS_COPING_STRATEGY: (21, 11, 3, "60.00", "31.43", "8.57"),
        InfoCategory.STRESS_DURATION: (19, 3, 0, "86.36", "13.64", "0.00"),
        InfoCategory.STRESS_ONSET: (9, 5, 0, "64.29", "35.71", "0.00"),
        InfoCategory.STRESS_TEMPORAL_PROFILE: (29, 0, 1, "96.67", "0.00", "3.33"),
    }
    assert [r.category for r in report.rows] == [c.value for c in InfoCategory]
    for category, (correct, incorrect, missed, *pcts) in expected.items():
        got = report.row(category)
        assert (got.correct, got.incorrect, got.missed) == (correct, incorrect, missed)
        assert [str(got.correct_pct), str(got.incorrect_pct), str(got.missed_pct)] == pcts

    assert report.row(InfoCategory.STRESS_RESPONSE).error_rate_pct == Decimal("22.54")
    overall = report.overall
    assert (overall.correct, overall.incorrect, overall.missed, overall.row_total) == (172, 27, 21, 220)
    assert [str(overall.correct_pct), str(overall.incorrect_pct), str(overall.missed_pct)] == ["78.18", "12.27", "9.55"]
    assert report.row(InfoCategory.STRESS_COPING_STRATEGY).hallucinations == 1
    assert report.row(InfoCategory.STRESS_ONSET).hallucinations == 2
    assert overall.hallucinations == 3


def test_all_correct_sheet():
    rows = [row(f"p{n}", InfoCategory.STRESSOR, 0, C) for n in range(5)]
    report = score_reviews(rows)
    assert str(report.row(InfoCategory.STRESSOR).correct_pct) == "100.00"
    assert report.row(InfoCategory.STRESS_ONSET).row_total == 0
    assert str(report.row(InfoCategory.STRESS_ONSET).correct_pct) == "0.00"
    assert str(report.overall.error_rate_pct) == "0.00"


@pytest.mark.parametrize(
    "bad",
    [
        row("p1", InfoCategory.STRESSOR, 0, None),
        row("p1", InfoCategory.STRESSOR, 0, M),
        row("p1", InfoCategory.STRESSOR, "M1", C),
        row("p1", InfoCategory.STRESSOR, 0, C, hallucination=True),
    ],
)
def test_sheet_invariants(bad):
    with pytest.raises(ReviewSheetError):
        score_reviews([row("p0", InfoCategory.STRESSOR, 0, C), bad])


def test_init_review_sheet_orders_rows():
    records = [
        record("p2", item(InfoCategory.STRESS_RESPONSE, "anxiety"), item(InfoCategory.STRESSOR, "exams")),
        record("p1", item(InfoCategory.STRESS_ONSET, "sudden onset")),
        record("p3"),
    ]
    rows = init_review_sheet(records)
    assert [(r.post_id, r.category, r.item_index) for r in rows] == [
        ("p1", InfoCategory.STRESS_ONSET, 0),
        ("p2", InfoCategory.STRESSOR, 1),
        ("p2", InfoCategory.STRESS_RESPONSE, 0),
    ]
    assert all(r.label is None and not r.hallucination for r in rows)
    assert rows[1].phrase == "exams"


# ---------- kappa ----------
def oracle_kappa(x, y, weights):
    """Weighted kappa in agreement form, with chance agreement summed over all cross-rater pairs."""
    last = len(REVIEW_LABELS) - 1
    power = 2 if weights == "quadratic" else 1
    agree = [[1 - (abs(i - j) / last) ** power for j in range(last + 1)] for i in range(last + 1)]
    n = len(x)
    po = sum(agree[i][j] for i, j in zip(x, y)) / n
    pe = sum(agree[i][j] for i in x for j in y) / (n * n)
    return (po - pe) / (1 - pe)


@pytest.mark.parametrize("weights, longest", [("linear", 6), ("quadratic", 4)])
def test_kappa_matches_oracle_exhaustively(weights, longest):
    checked = 0
    for length in range(1, longest + 1):
        sequences = list(itertools.product(range(len(REVIEW_LABELS)), repeat=length))
        for x in sequences:
            a = [REVIEW_LABELS[i] for i in x]
            for y in sequences:
                b = [REVIEW_LABELS[j] for j in y]
                if len(set(x) | set(y)) == 1:
                    with pytest.raises(DegenerateKappaError):
                        weighted_kappa(a, b, weights)
                    continue
                assert abs(weighted_kappa(a, b, weights) - oracle_kappa(x, y, weights)) <= 1e-12, (a, b)
                checked += 1
    assert checked == sum(9**n - 3 for n in range(1, longest + 1))


def test_kappa_is_symmetric():
    rng = random.Random(11)
    for _ in range(1000):
        length = rng.randint(2, 40)
        a = [rng.choice(REVIEW_LABELS) for _ in range(length)]
        b = [rng.choice(REVIEW_LABELS) for _ in range(length)]
        try:
            value = weighted_kappa(a, b)
        except DegenerateKappaError:
            continue
        assert value == pytest.approx(weighted_kappa(b, a), abs=1e-12)
        assert value <= 1.0 + 1e-12


def test_kappa_examples():
    assert weighted_kappa([C, I, M, C], [C, I, M, C]) == 1.0
    assert weighted_kappa([C, C, I, M], [C, I, I, M]) == pytest.approx(5 / 7)
    unweighted = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    assert weighted_kappa([C, C, I, M], [C, I, I, M], unweighted) == pytest.approx(7 / 11)


def test_linear_equals_quadratic_for_two_categories():
    a = ["yes", "yes", "no", "no", "yes"]
    b = ["yes", "no", "no", "yes", "yes"]
    assert weighted_kappa(a, b, "linear", ("yes", "no")) == weighted_kappa(a, b, "quadratic", ("yes", "no"))


def test_kappa_degenerate():
    with pytest.raises(DegenerateKappaError):
        weighted_kappa([C, C, C], [C, C, C])


@pytest.mark.parametrize(
    "a, b, kwargs",
    [
        ([C, I], [C], {}),
        ([], [], {}),
        ([C, "Maybe"], [C, I], {}),
        ([C, I], [I, C], {"weights": "cubic"}),
        ([C, I], [I, C], {"weights": [[0, 1], [1, 0]]}),
        (["x", "x"], ["x", "x"], {"categories": ("x",)}),
    ],
)
def test_kappa_rejects_bad_input(a, b, kwargs):
    with pytest.raises(KappaError):
        weighted_kappa(a, b, **kwargs)


def test_contingency_table():
    assert contingency_table([C, C, I, M], [C, I, I, M], REVIEW_LABELS) == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]


def test_align_sheets_skips_unshared_rows():
    first = [
        row("p2", InfoCategory.STRESSOR, 0, I),
        row("p1", InfoCategory.STRESSOR, 0, C),
        row("p1", InfoCategory.STRESSOR, "M1", M),
    ]
    second = [
        row("p1", InfoCategory.STRESSOR, 0, C),
        row("p2", InfoCategory.STRESSOR, 0, C),
        row("p3", InfoCategory.STRESSOR, 0, C),
    ]
    assert align_sheets(first, second) == ([C, I], [C, C])


# ---------- unmapped ----------
def test_unmapped_fixture(fixtures_dir):
    report = unmapped_report(read_records(fixtures_dir / "unmapped_records.jsonl"))
    assert (report.total_unmapped, report.duration_excluded, report.remaining, report.unique_total) == (52, 22, 30, 24)
    assert [(entry.category, entry.items, entry.unique) for entry in report.by_category] == [
        (InfoCategory.STRESSOR, 20, 16),
        (InfoCategory.STRESS_RESPONSE, 6, 4),
        (InfoCategory.STRESS_COPING_STRATEGY, 4, 4),
    ]
    assert (report.mappable_items, report.mapped_items) == (116, 86)
    assert str(report.coverage_pct) == "74.1"
    stressors = report.by_category[0].phrases
    assert sum(1 for phrase in stressors if normalize_term(phrase) == ["career", "failure"]) == 1


def test_unmapped_dedup_keeps_first_surface_form():
    report = unmapped_report(
        [
            record("p1", item(InfoCategory.STRESSOR, "Career Failures")),
            record("p2", item(InfoCategory.STRESSOR, "career failure"), item(InfoCategory.STRESS_DURATION, "2 weeks")),
        ]
    )
    assert report.by_category[0].phrases == ["Career Failures"]
    assert (report.total_unmapped, report.duration_excluded, report.remaining, report.unique_total) == (3, 1, 2, 1)
    assert str(report.coverage_pct) == "0.0"


def test_everything_mapped():
    report = unmapped_report([record("p1", item(InfoCategory.STRESS_RESPONSE, "anxiety", sid(32)))])
    assert report.by_category == []
    assert report.total_unmapped == 0
    assert str(report.coverage_pct) == "100.0"
