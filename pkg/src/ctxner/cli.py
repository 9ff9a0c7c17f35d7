"""Command-line interface: dataset stats and flags, evaluation, retrieval,
oracle runs and full experiment grids."""

from __future__ import annotations

import csv
import json
import random
import sys
from pathlib import Path

import click

from . import dataset_tools, experiments
from .corpus import entity_counts, length_histogram, load_corpus
from .metrics import ENTITY_TYPES, evaluate
from .oracle import OracleConfig, distance_distribution, oracle_retrieve
from .retrieval import HEURISTICS, build_index
from .tagging import ExternalProcessTagger, tag_with_context


@click.group()
def main():
    """Sentence-context retrieval experiments for NER on long documents."""


@main.group()
def dataset():
    """Dataset statistics and annotation-review flags."""


@dataset.command("stats")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--bucket-width", default=10, show_default=True, help="Histogram bucket width.")
def dataset_stats(corpus_dir, bucket_width):
    """Print entity counts and the sentences-per-document histogram as CSV."""
    corpus = load_corpus(corpus_dir)
    writer = csv.writer(sys.stdout)
    writer.writerow(["entity_type", "count"])
    for etype, count in entity_counts(corpus).items():
        writer.writerow([etype, count])
    click.echo("")
    histogram = length_histogram(corpus, bucket_width)
    writer.writerow(["bucket_start", "bucket_end", "count"])
    for start, count in histogram.counts.items():
        writer.writerow([start, start + bucket_width, count])


@dataset.command("flags")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--charlists", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of per-novel character lists (<doc_id>.txt).")
def dataset_flags(corpus_dir, charlists):
    """Flag suspect annotations for human review (never edits the data)."""
    corpus = load_corpus(corpus_dir)
    lists = dataset_tools.load_character_lists(charlists)
    flags = (
        dataset_tools.flag_charlist_missing(corpus, lists)
        + dataset_tools.flag_not_in_charlist(corpus, lists)
        + dataset_tools.flag_uncapitalized_per(corpus)
    )
    writer = csv.writer(sys.stdout)
    writer.writerow(["doc", "sentence", "start", "end", "rule", "surface"])
    for flag in flags:
        doc = corpus.document(flag.doc_id)
        sentence = doc.sentences[flag.sentence_index]
        surface = " ".join(t.text for t in sentence.tokens[flag.start : flag.end + 1])
        writer.writerow(
            [flag.doc_id, flag.sentence_index, flag.start, flag.end, flag.rule, surface]
        )


@main.command("eval")
@click.option("--gold", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--pred", required=True, type=click.Path(exists=True, file_okay=False))
def eval_command(gold, pred):
    """Score predicted corpus files against gold ones; CSV to stdout."""
    gold_corpus = load_corpus(gold)
    pred_corpus = load_corpus(pred)
    gold_ids = [d.id for d in gold_corpus.documents]
    pred_ids = [d.id for d in pred_corpus.documents]
    if gold_ids != pred_ids:
        raise click.ClickException(
            f"document sets differ: gold {gold_ids} vs pred {pred_ids}"
        )
    gold_tags = [s.tags() for d in gold_corpus.documents for s in d.sentences]
    pred_tags = [s.tags() for d in pred_corpus.documents for s in d.sentences]
    report = evaluate(gold_tags, pred_tags)
    writer = csv.writer(sys.stdout)
    writer.writerow(["label", "precision", "recall", "f1", "support"])
    writer.writerow(
        ["micro", repr(report.precision), repr(report.recall), repr(report.f1),
         sum(report.support.values())]
    )
    for etype in ENTITY_TYPES:
        scores = report.per_type[etype]
        writer.writerow(
            [etype, repr(scores.precision), repr(scores.recall), repr(scores.f1),
             report.support[etype]]
        )


@main.command("retrieve")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--heuristic", required=True, type=click.Choice(sorted(HEURISTICS)))
@click.option("--k", required=True, type=click.IntRange(min=1))
@click.option("--doc", "doc_id", required=True)
@click.option("--sentence", "sentence_index", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def retrieve_command(corpus_dir, heuristic, k, doc_id, sentence_index, seed):
    """Print the retrieved context sentences for one target sentence."""
    corpus = load_corpus(corpus_dir)
    try:
        doc = corpus.document(doc_id)
    except KeyError:
        raise click.ClickException(f"no document {doc_id!r} in {corpus_dir}")
    index = build_index(doc)
    rng = random.Random(seed)
    candidates = HEURISTICS[heuristic](doc, index, sentence_index, k, rng)
    writer = csv.writer(sys.stdout)
    writer.writerow(["sentence", "distance", "score"])
    for candidate in candidates:
        writer.writerow(
            [candidate.sentence_index, candidate.distance, repr(candidate.score)]
        )


@main.command("oracle")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--heuristic", default="bm25", show_default=True,
              type=click.Choice(sorted(HEURISTICS)))
@click.option("--candidates", default=16, show_default=True, type=click.IntRange(min=1))
@click.option("--retain", required=True, type=click.IntRange(min=1))
@click.option("--exclude-radius", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--tagger", "tagger_command", required=True,
              help="External tagger command speaking the JSON-lines protocol.")
@click.option("--doc", "doc_filter", default=None, help="Restrict to one document id.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--distances-out", default="distances.csv", show_default=True,
              type=click.Path(dir_okay=False))
def oracle_command(corpus_dir, heuristic, candidates, retain, exclude_radius,
                   tagger_command, doc_filter, seed, distances_out):
    """Oracle-rerank candidates per sentence; decisions as JSON lines on stdout."""
    corpus = load_corpus(corpus_dir)
    config = OracleConfig(
        retain=retain,
        candidate_count=candidates,
        exclusion_radius=exclude_radius,
    )
    docs = [d for d in corpus.documents if doc_filter in (None, d.id)]
    if not docs:
        raise click.ClickException(f"no document {doc_filter!r} in {corpus_dir}")
    decisions = []
    with ExternalProcessTagger(tagger_command) as tagger:
        for doc in docs:
            index = build_index(doc)
            rng = random.Random(f"{seed}:{doc.id}")
            for sentence in doc.sentences:
                decision = oracle_retrieve(
                    doc, sentence.doc_index, heuristic, config, tagger,
                    sentence.tags(), index=index, rng=rng,
                )
                decisions.append(decision)
                click.echo(json.dumps({
                    "doc": doc.id,
                    "sentence": sentence.doc_index,
                    "ranked": [
                        {"sentence": c.sentence_index, "distance": c.distance,
                         "score": c.score, "delta": delta}
                        for c, delta in decision.ranked
                    ],
                    "retained": list(decision.retained),
                }))
    experiments.emit_distances_csv(decisions, distances_out)
    histogram = distance_distribution(decisions)
    click.echo(
        f"retained={histogram.total} fraction_within_6={histogram.fraction_within_6:.4f}",
        err=True,
    )


@main.command("tag")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--tagger", "tagger_command", required=True)
@click.option("--doc", "doc_id", required=True)
@click.option("--sentence", "sentence_index", required=True, type=int)
@click.option("--heuristic", default=None, type=click.Choice(sorted(HEURISTICS)))
@click.option("--k", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
def tag_command(corpus_dir, tagger_command, doc_id, sentence_index, heuristic, k, seed):
    """Tag one sentence ad hoc, optionally with retrieved context attached."""
    corpus = load_corpus(corpus_dir)
    try:
        doc = corpus.document(doc_id)
    except KeyError:
        raise click.ClickException(f"no document {doc_id!r} in {corpus_dir}")
    retrieved = []
    if heuristic is not None:
        index = build_index(doc)
        retrieved = HEURISTICS[heuristic](doc, index, sentence_index, k, random.Random(seed))
    with ExternalProcessTagger(tagger_command) as tagger:
        tags = tag_with_context(tagger, doc, sentence_index, retrieved)
    for token, tag in zip(doc.sentences[sentence_index].tokens, tags):
        click.echo(f"{token.text}\t{tag}")


@main.command("experiment")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
def experiment_command(config_path, out_dir, corpus_dir):
    """Run the full grid and write results, aggregates, plots and distances."""
    corpus = load_corpus(corpus_dir)
    config = experiments.parse_config_file(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = experiments.run_experiment(corpus, config)
    experiments.emit_results_csv(table, out / "results.csv")
    aggregates = experiments.aggregate(table)
    experiments.emit_aggregates_csv(aggregates, out / "aggregates.csv")
    for metric in ("f1", "precision", "recall"):
        experiments.emit_plot(aggregates, metric, out / f"{metric}.svg")
    experiments.emit_distances_csv(table.oracle_decisions, out / "distances.csv")
    if table.failures:
        click.echo(f"{len(table.failures)} cell(s) failed:", err=True)
        for failure in table.failures:
            click.echo(
                f"  {failure.heuristic} k={failure.k} fold={failure.fold} "
                f"run={failure.run}: {failure.error}",
                err=True,
            )
    click.echo(f"wrote {len(table.rows)} rows to {out / 'results.csv'}")


if __name__ == "__main__":
    main()
