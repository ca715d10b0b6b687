"""``meso`` command-line interface.

One executable covers every workflow::

    meso validate ONTOLOGY [--profile meso] [--strict] [--summary]
    meso map --term T [--term T ...] | --keywords terms.txt [--out F]
    meso extract --input posts.jsonl --client mock --fixtures DIR --out records.jsonl
    meso coverage --docs DIR --embedder mock --k 10 --ngrams 1,2,3 --out coverage.json
    meso review init --records R --out sheet.csv
    meso evaluate --sheet sheet.csv --out metrics.json [--rater-a A --rater-b B]
    meso kappa --a a.csv --b b.csv --weights linear
    meso unmapped --records R --out unmapped.json
    meso seed [--out F] [--summary]

Commands that take ``--ontology`` fall back to the bundled seed when it is
omitted. Exit codes: 0 success, 1 failure (pitfalls, bad input, transport
errors), 2 usage error. Every output file is written atomically.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import click

from . import __version__
from .clients import build_completion_client, build_embedder
from .config import Settings, load_settings
from .errors import MesoError, OntologyLoadError
from .evaluation import align_sheets, init_review_sheet, score_reviews, unmapped_report, weighted_kappa
from .extraction import extract_batch, mock_client_from_fixtures
from .keywords import DEFAULT_K, coverage_report, load_stopwords, read_documents
from .matcher import map_keywords
from .ontology import error_pitfalls, scan_concepts, summarize_ontology
from .schemas import MappedTerm, MappingReport, Ontology, ValidationProfile
from .seed import seed_meso
from .store import (
    build_ontology,
    dump_json,
    dump_jsonl,
    dump_ontology,
    dump_review_sheet,
    load_ontology,
    read_ontology_document,
    read_posts,
    read_records,
    read_review_sheet,
    read_text,
    write_atomic,
)

log = logging.getLogger("meso")

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, writable=True, path_type=Path)


class MesoGroup(click.Group):
    """Click group that reports toolkit errors as a one-line failure (exit 1)."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except OntologyLoadError as exc:
            for pitfall in exc.pitfalls:
                click.echo(str(pitfall), err=True)
            raise click.ClickException(str(exc)) from exc
        except MesoError as exc:
            raise click.ClickException(str(exc)) from exc


def _settings(ctx: click.Context, **overrides: Any) -> Settings:
    settings = load_settings(ctx.obj["config"], overrides)
    if ctx.obj["show_config"]:
        click.echo(settings.render(), err=True, nl=False)
    return settings


def _ontology(path: Optional[Path]) -> Ontology:
    return seed_meso() if path is None else load_ontology(path)


def _parse_ngrams(ctx: click.Context, param: click.Parameter, value: str) -> list[int]:
    try:
        levels = sorted({int(part) for part in value.split(",") if part.strip()})
    except ValueError:
        raise click.BadParameter("expected a comma-separated list such as 1,2,3") from None
    if not levels or not set(levels) <= {1, 2, 3}:
        raise click.BadParameter("n-gram lengths must be drawn from 1, 2 and 3")
    return levels


def _emit(data: bytes, out: Optional[Path]) -> None:
    if out is None:
        click.echo(data.decode("utf-8"), nl=False)
    else:
        write_atomic(out, data)
        log.info("wrote %s", out)


ontology_option = click.option(
    "--ontology", type=EXISTING_FILE, default=None, help="Ontology JSON file (default: bundled seed)."
)


@click.group(cls=MesoGroup, invoke_without_command=True)
@click.version_option(__version__, prog_name="meso")
@click.option("--config", "config_path", type=EXISTING_FILE, default=None, help="Config file (default: ./meso.toml).")
@click.option("--show-config", is_flag=True, help="Print the effective configuration to stderr.")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], show_config: bool, verbose: bool) -> None:
    """Stress-ontology toolkit: validate, map, extract, measure coverage, evaluate."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = {"config": config_path, "show_config": show_config}
    if ctx.invoked_subcommand is None:
        if show_config:
            click.echo(load_settings(config_path).render(), nl=False)
        else:
            click.echo(ctx.get_help())


@cli.command()
@click.argument("ontology_path", metavar="ONTOLOGY", type=EXISTING_FILE)
@click.option(
    "--profile",
    type=click.Choice([p.value for p in ValidationProfile]),
    default=ValidationProfile.GENERIC.value,
    show_default=True,
)
@click.option("--strict", is_flag=True, help="Fail on any pitfall, not only Error-severity ones.")
@click.option("--summary", is_flag=True, help="Also print shape statistics.")
@click.pass_context
def validate(ctx: click.Context, ontology_path: Path, profile: str, strict: bool, summary: bool) -> None:
    """Scan an ontology for pitfalls. Exits 1 on Error-severity pitfalls."""
    document = read_ontology_document(ontology_path)
    pitfalls = scan_concepts(document.concepts, ValidationProfile(profile))
    for pitfall in pitfalls:
        click.echo(str(pitfall))
    click.echo(f"{len(pitfalls)} pitfalls")
    errors = error_pitfalls(pitfalls)
    if summary and not errors:
        click.echo(dump_json(summarize_ontology(build_ontology(document))).decode("utf-8"), nl=False)
    if errors or (strict and pitfalls):
        ctx.exit(1)


@cli.command("map")
@ontology_option
@click.option("--term", "terms", multiple=True, help="Term to map; repeatable.")
@click.option(
    "--keywords",
    "--input",
    "keywords_path",
    type=EXISTING_FILE,
    default=None,
    help="UTF-8 file with one term per line.",
)
@click.option("--out", type=OUTPUT_FILE, default=None, help="Write JSON here instead of stdout.")
def map_command(
    ontology: Optional[Path], terms: Sequence[str], keywords_path: Optional[Path], out: Optional[Path]
) -> None:
    """Map terms onto ontology concepts and report the category distribution."""
    all_terms = list(terms)
    if keywords_path is not None:
        lines = read_text(keywords_path).splitlines()
        all_terms.extend(line.strip() for line in lines if line.strip())
    if not all_terms:
        raise click.UsageError("give --term or --keywords")
    o = _ontology(ontology)
    results, distribution = map_keywords(o, all_terms)
    mapped = [
        MappedTerm(
            **result.model_dump(),
            matched_labels=tuple(o.concepts[concept_id].label for concept_id in result.matched_ids),
        )
        for result in results
    ]
    _emit(dump_json(MappingReport(distribution=distribution, results=mapped)), out)


@cli.command()
@ontology_option
@click.option("--input", "input_path", type=EXISTING_FILE, required=True, help="Posts as JSON Lines.")
@click.option("--client", type=click.Choice(["mock", "http", "bedrock"]), default="mock", show_default=True)
@click.option(
    "--fixtures",
    type=click.Path(exists=True, path_type=Path),
    default=None,
    help="Canned responses (directory with responses.jsonl) for the mock client.",
)
@click.option("--out", type=OUTPUT_FILE, required=True)
@click.option("--parallelism", type=click.IntRange(min=1), default=None)
@click.option("--retries", type=click.IntRange(min=0), default=None)
@click.option("--endpoint", default=None, help="Override llm_endpoint.")
@click.option("--model", default=None, help="Override llm_model.")
@click.option("--timeout", type=click.FloatRange(min=0, min_open=True), default=None)
@click.pass_context
def extract(
    ctx: click.Context,
    ontology: Optional[Path],
    input_path: Path,
    client: str,
    fixtures: Optional[Path],
    out: Path,
    parallelism: Optional[int],
    retries: Optional[int],
    endpoint: Optional[str],
    model: Optional[str],
    timeout: Optional[float],
) -> None:
    """Extract the six stress categories from every post."""
    settings = _settings(
        ctx,
        parallelism=parallelism,
        retries=retries,
        llm_endpoint=endpoint,
        llm_model=model,
        llm_timeout=timeout,
    )
    o = _ontology(ontology)
    posts = read_posts(input_path)
    if client == "mock":
        if fixtures is None:
            raise click.UsageError("--client mock needs --fixtures")
        completion = mock_client_from_fixtures(fixtures, o, posts)
    else:
        completion = build_completion_client(client, settings)
    records = extract_batch(completion, o, posts, parallelism=settings.parallelism, retries=settings.retries)
    write_atomic(out, dump_jsonl(records))
    log.info("wrote %d record(s) to %s", len(records), out)


@cli.command()
@ontology_option
@click.option(
    "--docs",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
    help="Directory with one UTF-8 text file per document.",
)
@click.option("--embedder", type=click.Choice(["mock", "http", "bedrock"]), default="mock", show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=DEFAULT_K, show_default=True)
@click.option("--ngrams", default="1,2,3", show_default=True, callback=_parse_ngrams)
@click.option("--stopwords", type=EXISTING_FILE, default=None, help="Stopword list (default: bundled English list).")
@click.option("--out", type=OUTPUT_FILE, required=True)
@click.option("--parallelism", type=click.IntRange(min=1), default=None)
@click.option("--endpoint", default=None, help="Override embedding_endpoint.")
@click.option("--model", default=None, help="Override embedding_model.")
@click.pass_context
def coverage(
    ctx: click.Context,
    ontology: Optional[Path],
    docs: Path,
    embedder: str,
    k: int,
    ngrams: list[int],
    stopwords: Optional[Path],
    out: Path,
    parallelism: Optional[int],
    endpoint: Optional[str],
    model: Optional[str],
) -> None:
    """Rank keywords per document and measure how many the ontology covers."""
    settings = _settings(ctx, parallelism=parallelism, embedding_endpoint=endpoint, embedding_model=model)
    report = coverage_report(
        _ontology(ontology),
        read_documents(docs),
        build_embedder(embedder, settings),
        k=k,
        n_set=ngrams,
        stopwords=load_stopwords(stopwords),
        parallelism=settings.parallelism,
    )
    write_atomic(out, dump_json(report))
    percentages = report.distribution.percentages
    click.echo(" ".join(f"{category.value}={value}%" for category, value in percentages.items()))


@cli.group(cls=MesoGroup)
def review() -> None:
    """Review sheets for human evaluation."""


@review.command("init")
@click.option("--records", type=EXISTING_FILE, required=True)
@click.option("--out", type=OUTPUT_FILE, required=True)
def review_init(records: Path, out: Path) -> None:
    """Write one unlabeled row per extracted item."""
    rows = init_review_sheet(read_records(records))
    write_atomic(out, dump_review_sheet(rows))
    log.info("wrote %d review row(s) to %s", len(rows), out)


@cli.command()
@click.option("--sheet", type=EXISTING_FILE, required=True, help="Adjudicated review sheet.")
@click.option("--out", type=OUTPUT_FILE, required=True)
@click.option("--rater-a", type=EXISTING_FILE, default=None, help="First reviewer's raw sheet.")
@click.option("--rater-b", type=EXISTING_FILE, default=None, help="Second reviewer's raw sheet.")
@click.option("--weights", type=click.Choice(["linear", "quadratic"]), default="linear", show_default=True)
def evaluate(sheet: Path, out: Path, rater_a: Optional[Path], rater_b: Optional[Path], weights: str) -> None:
    """Score an adjudicated sheet; optionally add inter-rater kappa."""
    if (rater_a is None) != (rater_b is None):
        raise click.UsageError("--rater-a and --rater-b go together")
    report = score_reviews(read_review_sheet(sheet))
    if rater_a is not None and rater_b is not None:
        labels_a, labels_b = align_sheets(read_review_sheet(rater_a), read_review_sheet(rater_b))
        value = weighted_kappa(labels_a, labels_b, weights)
        report = report.model_copy(update={"kappa": value, "kappa_weights": weights})
    write_atomic(out, dump_json(report))
    for row in [*report.rows, report.overall]:
        click.echo(
            f"{row.category:<22} {row.correct:>4} ({row.correct_pct}) {row.incorrect:>4} ({row.incorrect_pct})"
            f" {row.missed:>4} ({row.missed_pct}) {row.row_total:>4}"
        )


@cli.command()
@click.option("--a", "sheet_a", type=EXISTING_FILE, required=True)
@click.option("--b", "sheet_b", type=EXISTING_FILE, required=True)
@click.option("--weights", type=click.Choice(["linear", "quadratic"]), default="linear", show_default=True)
def kappa(sheet_a: Path, sheet_b: Path, weights: str) -> None:
    """Weighted kappa between two reviewers' sheets."""
    labels_a, labels_b = align_sheets(read_review_sheet(sheet_a), read_review_sheet(sheet_b))
    value = weighted_kappa(labels_a, labels_b, weights)
    click.echo(f"kappa ({weights}, {len(labels_a)} rows) = {value:.4f}")


@cli.command()
@click.option("--records", type=EXISTING_FILE, required=True)
@click.option("--out", type=OUTPUT_FILE, required=True)
def unmapped(records: Path, out: Path) -> None:
    """List extracted phrases the ontology does not cover."""
    report = unmapped_report(read_records(records))
    write_atomic(out, dump_json(report))
    click.echo(
        f"{report.total_unmapped} unmapped, {report.duration_excluded} durations excluded, "
        f"{report.remaining} remaining, {report.unique_total} unique; coverage {report.coverage_pct}%"
    )


@cli.command()
@click.option("--out", type=OUTPUT_FILE, default=None, help="Write the seed ontology here instead of stdout.")
@click.option("--summary", is_flag=True, help="Print shape statistics instead of the ontology.")
def seed(out: Optional[Path], summary: bool) -> None:
    """Export the bundled seed ontology."""
    o = seed_meso()
    if summary:
        click.echo(dump_json(summarize_ontology(o)).decode("utf-8"), nl=False)
    if out is not None or not summary:
        _emit(dump_ontology(o), out)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        result = cli.main(args=list(sys.argv[1:] if argv is None else argv), prog_name="meso", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
