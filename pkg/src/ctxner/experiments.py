"""Experiment grid driver: heuristic x retrieved-count x fold x run.

Each cell trains (or selects) a tagger on the fold's training documents,
tags every test sentence under the cell's retrieval setting, and scores the
fold with exact-match P/R/F1. Failed cells are recorded, never fatal.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import queue
import random
import statistics
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .corpus import Corpus, Document, FoldSplit, split_folds
from .metrics import evaluate
from .oracle import OracleConfig, OracleDecision, oracle_retrieve
from .retrieval import HEURISTICS, SentenceIndex, build_index
from .tagging import (
    ExternalProcessTagger,
    ProtocolError,
    Tagger,
    TaggingError,
    tag_with_context,
    train_memorizing,
)

log = logging.getLogger("ctxner")

RESULTS_HEADER = ["heuristic", "k", "fold", "run", "precision", "recall", "f1"]

ORACLE_PREFIX = "oracle-"


def _known_setting(name: str) -> bool:
    if name == "none" or name in HEURISTICS:
        return True
    return name.startswith(ORACLE_PREFIX) and name[len(ORACLE_PREFIX):] in HEURISTICS


@dataclass(frozen=True)
class ExperimentConfig:
    heuristics: tuple[str, ...]
    k_values: tuple[int, ...]
    n_folds: int = 5
    n_runs: int = 3
    seed: int = 0
    tagger_command: str | None = None
    oracle: OracleConfig | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.k_values:
            raise ValueError("k_values must be non-empty")
        if any(b <= a for a, b in zip(self.k_values, self.k_values[1:])):
            raise ValueError("k_values must be strictly increasing")
        if any(k < 1 for k in self.k_values):
            raise ValueError("k_values must be positive")
        unknown = [h for h in self.heuristics if not _known_setting(h)]
        if unknown:
            raise ValueError(f"unknown heuristic settings: {unknown}")
        if self.n_folds < 1 or self.n_runs < 1 or self.workers < 1:
            raise ValueError("n_folds, n_runs and workers must be >= 1")


@dataclass(frozen=True)
class ResultsRow:
    heuristic: str
    k: int
    fold: int
    run: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class CellFailure:
    heuristic: str
    k: int
    fold: int
    run: int
    error: str


@dataclass
class ResultsTable:
    rows: list[ResultsRow] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)
    fold_log: dict[tuple[int, int], FoldSplit] = field(default_factory=dict)
    oracle_decisions: list[OracleDecision] = field(default_factory=list)

    def sorted_rows(self) -> list[ResultsRow]:
        return sorted(
            self.rows, key=lambda r: (r.heuristic, r.k, r.fold, r.run)
        )


@dataclass(frozen=True)
class AggregateRow:
    heuristic: str
    k: int
    precision_mean: float
    precision_std: float
    recall_mean: float
    recall_std: float
    f1_mean: float
    f1_std: float


class _TaggerPool:
    """Hands out tagger sessions, one per concurrent borrower."""

    def __init__(self, factory: Callable[[], Tagger], size: int):
        self._factory = factory
        self._sessions: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._created = 0
        self._size = size
        self._all: list[Tagger] = []

    def borrow(self) -> Tagger:
        try:
            return self._sessions.get_nowait()
        except queue.Empty:
            pass
        with self._lock:
            if self._created < self._size:
                self._created += 1
                session = self._factory()
                self._all.append(session)
                return session
        return self._sessions.get()

    def give_back(self, session: Tagger) -> None:
        self._sessions.put(session)

    def close(self) -> None:
        for session in self._all:
            close = getattr(session, "close", None)
            if close:
                close()


def _cell_rng(run_seed: int, fold: int, heuristic: str, k: int) -> random.Random:
    return random.Random(f"{run_seed}:{fold}:{heuristic}:{k}")


def _predict_cell(
    heuristic: str,
    k: int,
    test_docs: Sequence[Document],
    indexes: dict[str, SentenceIndex],
    tagger: Tagger,
    rng: random.Random,
    oracle_template: OracleConfig,
    decisions_out: list[OracleDecision],
) -> list[list[str]]:
    predictions: list[list[str]] = []
    for doc in test_docs:
        index = indexes[doc.id]
        for sentence in doc.sentences:
            i = sentence.doc_index
            if heuristic == "none":
                retrieved = []
            elif heuristic.startswith(ORACLE_PREFIX):
                config = dataclasses.replace(
                    oracle_template,
                    retain=min(k, oracle_template.candidate_count),
                )
                decision = oracle_retrieve(
                    doc,
                    i,
                    heuristic[len(ORACLE_PREFIX):],
                    config,
                    tagger,
                    sentence.tags(),
                    index=index,
                    rng=rng,
                )
                decisions_out.append(decision)
                ranked_by_index = {c.sentence_index: c for c, _ in decision.ranked}
                retrieved = [ranked_by_index[j] for j in decision.retained]
            else:
                retrieved = HEURISTICS[heuristic](doc, index, i, k, rng)
            predictions.append(tag_with_context(tagger, doc, i, retrieved))
    return predictions


def run_experiment(
    corpus: Corpus,
    config: ExperimentConfig,
    tagger_factory: Callable[[Sequence[Document], int, FoldSplit], Tagger] | None = None,
) -> ResultsTable:
    """Run the full grid and return one row per (heuristic, k, fold, run) cell.

    ``none`` rows are retrieval-free, so each (fold, run) baseline is computed
    once and replicated across k values.
    """
    factory = tagger_factory or _default_tagger_factory(config)
    indexes = {doc.id: build_index(doc) for doc in corpus.documents}
    oracle_template = config.oracle or OracleConfig(retain=1)
    table = ResultsTable()

    for run in range(config.n_runs):
        run_seed = config.seed + run
        folds = split_folds(corpus, config.n_folds, run_seed)
        for fold in folds:
            table.fold_log[(run, fold.fold_index)] = fold
            train_docs = [d for d in corpus.documents if d.id in fold.train_doc_ids]
            test_docs = [d for d in corpus.documents if d.id in fold.test_doc_ids]
            gold = [
                sentence.tags() for doc in test_docs for sentence in doc.sentences
            ]
            pool = _TaggerPool(lambda: factory(train_docs, run, fold), config.workers)
            try:
                _run_fold_cells(
                    config, table, run, run_seed, fold, test_docs, indexes,
                    gold, pool, oracle_template,
                )
            finally:
                pool.close()

    keys = [(r.heuristic, r.k, r.fold, r.run) for r in table.rows]
    if len(set(keys)) != len(keys):
        raise RuntimeError("internal error: duplicate grid cell produced")
    return table


def _run_fold_cells(
    config: ExperimentConfig,
    table: ResultsTable,
    run: int,
    run_seed: int,
    fold: FoldSplit,
    test_docs: Sequence[Document],
    indexes: dict[str, SentenceIndex],
    gold: list[list[str]],
    pool: _TaggerPool,
    oracle_template: OracleConfig,
) -> None:
    cells = [
        (heuristic, k)
        for heuristic in config.heuristics
        if heuristic != "none"
        for k in config.k_values
    ]

    def run_cell(cell: tuple[str, int]):
        heuristic, k = cell
        tagger = pool.borrow()
        try:
            decisions: list[OracleDecision] = []
            predictions = _predict_cell(
                heuristic, k, test_docs, indexes, tagger,
                _cell_rng(run_seed, fold.fold_index, heuristic, k),
                oracle_template, decisions,
            )
            report = evaluate(gold, predictions)
            return (
                ResultsRow(
                    heuristic, k, fold.fold_index, run,
                    report.precision, report.recall, report.f1,
                ),
                decisions,
                None,
            )
        except (TaggingError, ProtocolError) as exc:
            log.warning("cell %s k=%d fold=%d run=%d failed: %s",
                        heuristic, k, fold.fold_index, run, exc)
            return None, [], CellFailure(heuristic, k, fold.fold_index, run, str(exc))
        finally:
            pool.give_back(tagger)

    if "none" in config.heuristics:
        tagger = pool.borrow()
        try:
            baseline = _predict_cell(
                "none", 0, test_docs, indexes, tagger,
                _cell_rng(run_seed, fold.fold_index, "none", 0),
                oracle_template, [],
            )
            report = evaluate(gold, baseline)
            for k in config.k_values:
                table.rows.append(
                    ResultsRow("none", k, fold.fold_index, run,
                               report.precision, report.recall, report.f1)
                )
        except (TaggingError, ProtocolError) as exc:
            log.warning("baseline fold=%d run=%d failed: %s", fold.fold_index, run, exc)
            for k in config.k_values:
                table.failures.append(
                    CellFailure("none", k, fold.fold_index, run, str(exc))
                )
        finally:
            pool.give_back(tagger)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(run_cell, cells))
    else:
        outcomes = [run_cell(cell) for cell in cells]

    for row, decisions, failure in outcomes:
        if failure is not None:
            table.failures.append(failure)
        else:
            table.rows.append(row)
            table.oracle_decisions.extend(decisions)


def _default_tagger_factory(config: ExperimentConfig):
    if config.tagger_command is None:
        def factory(train_docs: Sequence[Document], run: int, fold: FoldSplit) -> Tagger:
            return train_memorizing(train_docs)
    else:
        def factory(train_docs: Sequence[Document], run: int, fold: FoldSplit) -> Tagger:
            command = config.tagger_command.replace(
                "{fold}", str(fold.fold_index)
            ).replace("{run}", str(run))
            return ExternalProcessTagger(command)
    return factory


def aggregate(table: ResultsTable) -> list[AggregateRow]:
    """Mean and sample standard deviation of P/R/F1 per (heuristic, k)."""
    if not table.rows:
        raise ValueError("cannot aggregate an empty results table")
    groups: dict[tuple[str, int], list[ResultsRow]] = {}
    for row in table.sorted_rows():
        groups.setdefault((row.heuristic, row.k), []).append(row)

    def mean_std(values: list[float]) -> tuple[float, float]:
        return (
            statistics.fmean(values),
            statistics.stdev(values) if len(values) > 1 else 0.0,
        )

    aggregates = []
    for (heuristic, k), rows in sorted(groups.items()):
        p_mean, p_std = mean_std([r.precision for r in rows])
        r_mean, r_std = mean_std([r.recall for r in rows])
        f_mean, f_std = mean_std([r.f1 for r in rows])
        aggregates.append(
            AggregateRow(heuristic, k, p_mean, p_std, r_mean, r_std, f_mean, f_std)
        )
    return aggregates


def emit_results_csv(table: ResultsTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULTS_HEADER)
        for row in table.sorted_rows():
            writer.writerow(
                [row.heuristic, row.k, row.fold, row.run,
                 repr(row.precision), repr(row.recall), repr(row.f1)]
            )


def parse_results_csv(path: str | Path) -> ResultsTable:
    table = ResultsTable()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != RESULTS_HEADER:
            raise ValueError(f"unexpected results header: {header}")
        for record in reader:
            heuristic, k, fold, run, precision, recall, f1 = record
            table.rows.append(
                ResultsRow(heuristic, int(k), int(fold), int(run),
                           float(precision), float(recall), float(f1))
            )
    return table


def emit_aggregates_csv(aggregates: Sequence[AggregateRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["heuristic", "k", "precision_mean", "precision_std",
             "recall_mean", "recall_std", "f1_mean", "f1_std"]
        )
        for agg in aggregates:
            writer.writerow(
                [agg.heuristic, agg.k,
                 repr(agg.precision_mean), repr(agg.precision_std),
                 repr(agg.recall_mean), repr(agg.recall_std),
                 repr(agg.f1_mean), repr(agg.f1_std)]
            )


def emit_distances_csv(decisions: Sequence[OracleDecision], path: str | Path) -> None:
    from .oracle import distance_distribution

    histogram = distance_distribution(decisions)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["distance", "count"])
        for distance, count in histogram.counts.items():
            writer.writerow([distance, count])


_TRUE_WORDS = {"true", "yes", "1", "on"}
_FALSE_WORDS = {"false", "no", "0", "off"}


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in _TRUE_WORDS:
        return True
    if lowered in _FALSE_WORDS:
        return False
    raise ValueError(f"{key}: expected a boolean, got {value!r}")


def parse_config_file(path: str | Path) -> ExperimentConfig:
    """Parse a flat ``key = value`` experiment config file."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()

    known = {
        "heuristics", "k_values", "n_folds", "n_runs", "seed", "tagger_command",
        "oracle_candidates", "oracle_positive_only", "oracle_exclusion_radius",
        "workers",
    }
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    if "heuristics" not in values or "k_values" not in values:
        raise ValueError("config must set 'heuristics' and 'k_values'")

    oracle = OracleConfig(
        retain=1,
        candidate_count=int(values.get("oracle_candidates", 16)),
        positive_only=_parse_bool(
            values.get("oracle_positive_only", "true"), "oracle_positive_only"
        ),
        exclusion_radius=int(values.get("oracle_exclusion_radius", 0)),
    )
    return ExperimentConfig(
        heuristics=tuple(h.strip() for h in values["heuristics"].split(",") if h.strip()),
        k_values=tuple(int(k) for k in values["k_values"].split(",") if k.strip()),
        n_folds=int(values.get("n_folds", 5)),
        n_runs=int(values.get("n_runs", 3)),
        seed=int(values.get("seed", 0)),
        tagger_command=values.get("tagger_command") or None,
        oracle=oracle,
        workers=int(values.get("workers", 1)),
    )


def emit_plot(
    aggregates: Sequence[AggregateRow], metric: str, path: str | Path
) -> None:
    """Line chart of the mean metric versus k, one line per heuristic, +-1 std."""
    if metric not in ("precision", "recall", "f1"):
        raise ValueError(f"unknown metric {metric!r}")
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "ctxner"
    import matplotlib.pyplot as plt

    by_heuristic: dict[str, list[AggregateRow]] = {}
    for agg in aggregates:
        by_heuristic.setdefault(agg.heuristic, []).append(agg)

    fig, ax = plt.subplots(figsize=(6, 4))
    for heuristic, rows in sorted(by_heuristic.items()):
        rows = sorted(rows, key=lambda a: a.k)
        ks = [a.k for a in rows]
        means = [getattr(a, f"{metric}_mean") for a in rows]
        stds = [getattr(a, f"{metric}_std") for a in rows]
        ax.plot(ks, means, marker="o", label=heuristic)
        ax.fill_between(
            ks,
            [m - s for m, s in zip(means, stds)],
            [m + s for m, s in zip(means, stds)],
            alpha=0.15,
        )
    ax.set_xlabel("max retrieved sentences")
    ax.set_ylabel(f"mean {metric}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
