"""Reader, writer and statistics for the tokenized BIO-annotated novel corpus.

File format: one ``.conll`` file per document, UTF-8, one ``token<TAB>tag``
pair per line, sentences separated by a single blank line. Everything is
immutable after load.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .metrics import ENTITY_TYPES, VALID_TAGS, extract_entities


class CorpusFormatError(ValueError):
    """A dataset file violates the token-per-line format."""


@dataclass(frozen=True)
class Token:
    text: str
    tag: str

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise ValueError(f"token text must be non-empty and whitespace-free: {self.text!r}")
        if self.tag not in VALID_TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")


@dataclass(frozen=True)
class Sentence:
    doc_index: int
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("sentence must contain at least one token")

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def tags(self) -> list[str]:
        return [t.tag for t in self.tokens]


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        for pos, sentence in enumerate(self.sentences):
            if sentence.doc_index != pos:
                raise ValueError(
                    f"document {self.id}: sentence at position {pos} "
                    f"carries doc_index {sentence.doc_index}"
                )

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            dupes = sorted(i for i, n in Counter(ids).items() if n > 1)
            raise ValueError(f"duplicate document ids: {dupes}")

    def __len__(self) -> int:
        return len(self.documents)

    def document(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_doc_ids: frozenset[str]
    test_doc_ids: frozenset[str]

    def __post_init__(self):
        if self.train_doc_ids & self.test_doc_ids:
            raise ValueError("train and test document sets overlap")


@dataclass(frozen=True)
class Histogram:
    """Counts of documents per length bucket; empty buckets are omitted."""

    bucket_width: int
    counts: Mapping[int, int]  # bucket start -> count

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _parse_document(path: Path) -> Document:
    sentences: list[Sentence] = []
    pending: list[Token] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if pending:
                    sentences.append(Sentence(len(sentences), tuple(pending)))
                    pending = []
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise CorpusFormatError(
                    f"{path.name}:{lineno}: expected 'token<TAB>tag', got {len(fields)} fields"
                )
            text, tag = fields
            try:
                pending.append(Token(text, tag))
            except ValueError as exc:
                raise CorpusFormatError(f"{path.name}:{lineno}: {exc}") from exc
    if pending:
        sentences.append(Sentence(len(sentences), tuple(pending)))
    if not sentences:
        raise CorpusFormatError(f"{path.name}: file contains no sentences")
    return Document(id=path.stem, sentences=tuple(sentences))


def load_corpus(root: str | Path) -> Corpus:
    """Load every ``.conll`` file under ``root``, ordered by document id."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    paths = sorted(root.glob("*.conll"), key=lambda p: p.stem)
    if not paths:
        raise CorpusFormatError(f"no .conll files in {root}")
    return Corpus(documents=tuple(_parse_document(p) for p in paths))


def save_corpus(corpus: Corpus, root: str | Path) -> None:
    """Write ``corpus`` back out in the dataset file format."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for doc in corpus.documents:
        lines: list[str] = []
        for sentence in doc.sentences:
            lines.extend(f"{t.text}\t{t.tag}" for t in sentence.tokens)
            lines.append("")
        (root / f"{doc.id}.conll").write_text("\n".join(lines), encoding="utf-8")


def entity_counts(corpus: Corpus) -> dict[str, int]:
    """Total extracted entities per type over every sentence of the corpus."""
    counts = {t: 0 for t in ENTITY_TYPES}
    for doc in corpus.documents:
        for sentence in doc.sentences:
            for entity in extract_entities(sentence.tags()):
                counts[entity.etype] += 1
    return counts


def length_histogram(corpus: Corpus, bucket_width: int) -> Histogram:
    """Histogram of sentences-per-document with the given bucket width."""
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")
    counts: Counter[int] = Counter()
    for doc in corpus.documents:
        counts[(len(doc) // bucket_width) * bucket_width] += 1
    return Histogram(bucket_width=bucket_width, counts=dict(sorted(counts.items())))


def split_folds(corpus: Corpus, n_folds: int, seed: int) -> list[FoldSplit]:
    """Shuffle documents by seed and deal them round-robin into test sets."""
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    if n_folds > len(corpus.documents):
        raise ValueError(
            f"n_folds ({n_folds}) exceeds document count ({len(corpus.documents)})"
        )
    ids = [d.id for d in corpus.documents]
    random.Random(seed).shuffle(ids)
    all_ids = frozenset(ids)
    folds = []
    for fold_index in range(n_folds):
        test = frozenset(ids[fold_index::n_folds])
        folds.append(
            FoldSplit(
                fold_index=fold_index,
                train_doc_ids=all_ids - test,
                test_doc_ids=test,
            )
        )
    return folds
