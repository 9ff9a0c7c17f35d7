"""Reader for the token-per-line dataset format and label bookkeeping.

Deliberately self-contained: the bridge talks to the experiment engine only
through files and the wire protocol, never through imports.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

LABELS = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"]
LABEL_TO_ID = {label: i for i, label in enumerate(LABELS)}
ID_TO_LABEL = {i: label for i, label in enumerate(LABELS)}


@dataclass
class TaggedSentence:
    tokens: list[str]
    tags: list[str]


@dataclass
class TaggedDocument:
    doc_id: str
    sentences: list[TaggedSentence]


def read_conll_file(path: Path) -> TaggedDocument:
    sentences: list[TaggedSentence] = []
    tokens: list[str] = []
    tags: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip():
            if tokens:
                sentences.append(TaggedSentence(tokens, tags))
                tokens, tags = [], []
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ValueError(f"{path.name}:{lineno}: expected 'token<TAB>tag'")
        if fields[1] not in LABEL_TO_ID:
            raise ValueError(f"{path.name}:{lineno}: unknown tag {fields[1]!r}")
        tokens.append(fields[0])
        tags.append(fields[1])
    if tokens:
        sentences.append(TaggedSentence(tokens, tags))
    if not sentences:
        raise ValueError(f"{path.name}: no sentences")
    return TaggedDocument(doc_id=path.stem, sentences=sentences)


def read_conll_dir(root: str | Path) -> list[TaggedDocument]:
    root = Path(root)
    paths = sorted(root.glob("*.conll"), key=lambda p: p.stem)
    if not paths:
        raise FileNotFoundError(f"no .conll files under {root}")
    return [read_conll_file(p) for p in paths]
