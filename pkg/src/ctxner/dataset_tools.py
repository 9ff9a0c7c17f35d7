"""Semi-automated annotation review: flag suspect spans for a human pass.

These rules only flag; they never edit the corpus. PER-centric rules match
the original annotations, which contained person entities only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, Sentence
from .metrics import extract_entities

log = logging.getLogger("ctxner")

RULE_CHARLIST_MISSING = "charlist-missing"
RULE_NOT_IN_CHARLIST = "not-in-charlist"
RULE_UNCAPITALIZED_PER = "uncapitalized-per"


@dataclass(frozen=True)
class CharacterList:
    doc_id: str
    names: frozenset[str]

    def __post_init__(self):
        if not self.names:
            raise ValueError(f"character list for {self.doc_id} is empty")


@dataclass(frozen=True)
class ReviewFlag:
    doc_id: str
    sentence_index: int
    start: int
    end: int  # inclusive
    rule: str
    note: str


def normalize_surface(text: str) -> str:
    return " ".join(text.split())


def load_character_lists(root: str | Path) -> dict[str, CharacterList]:
    """Read one ``<doc_id>.txt`` per novel, one character name per line."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"character list directory not found: {root}")
    lists = {}
    for path in sorted(root.glob("*.txt")):
        names = frozenset(
            normalize_surface(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
        lists[path.stem] = CharacterList(doc_id=path.stem, names=names)
    return lists


def _surface(sentence: Sentence, start: int, end: int) -> str:
    return " ".join(t.text for t in sentence.tokens[start : end + 1])


def flag_charlist_missing(
    corpus: Corpus, lists: dict[str, CharacterList]
) -> list[ReviewFlag]:
    """Character-list names appearing in the text with no annotation at all."""
    flags = []
    for doc in corpus.documents:
        charlist = lists.get(doc.id)
        if charlist is None:
            log.warning("no character list for %s; skipping", doc.id)
            continue
        name_seqs = {tuple(name.split()) for name in charlist.names}
        max_len = max(len(seq) for seq in name_seqs)
        for sentence in doc.sentences:
            texts = sentence.texts()
            tags = sentence.tags()
            pos = 0
            while pos < len(texts):
                matched_end = None
                for length in range(min(max_len, len(texts) - pos), 0, -1):
                    if tuple(texts[pos : pos + length]) in name_seqs:
                        matched_end = pos + length - 1
                        break
                if matched_end is None:
                    pos += 1
                    continue
                if all(tags[p] == "O" for p in range(pos, matched_end + 1)):
                    surface = _surface(sentence, pos, matched_end)
                    flags.append(
                        ReviewFlag(
                            doc.id, sentence.doc_index, pos, matched_end,
                            RULE_CHARLIST_MISSING,
                            f'"{surface}" is in the character list but not annotated',
                        )
                    )
                pos = matched_end + 1
    return flags


def flag_not_in_charlist(
    corpus: Corpus, lists: dict[str, CharacterList]
) -> list[ReviewFlag]:
    """PER entities whose surface matches no character-list name."""
    flags = []
    for doc in corpus.documents:
        charlist = lists.get(doc.id)
        if charlist is None:
            log.warning("no character list for %s; skipping", doc.id)
            continue
        for sentence in doc.sentences:
            for entity in sorted(extract_entities(sentence.tags())):
                if entity.etype != "PER":
                    continue
                surface = _surface(sentence, entity.start, entity.end)
                if normalize_surface(surface) not in charlist.names:
                    flags.append(
                        ReviewFlag(
                            doc.id, sentence.doc_index, entity.start, entity.end,
                            RULE_NOT_IN_CHARLIST,
                            f'"{surface}" is annotated PER but not in the character list',
                        )
                    )
    return flags


def flag_uncapitalized_per(corpus: Corpus) -> list[ReviewFlag]:
    """PER entities in which no token starts with an uppercase letter."""
    flags = []
    for doc in corpus.documents:
        for sentence in doc.sentences:
            for entity in sorted(extract_entities(sentence.tags())):
                if entity.etype != "PER":
                    continue
                tokens = sentence.tokens[entity.start : entity.end + 1]
                if any(t.text[0].isupper() for t in tokens):
                    continue
                surface = _surface(sentence, entity.start, entity.end)
                flags.append(
                    ReviewFlag(
                        doc.id, sentence.doc_index, entity.start, entity.end,
                        RULE_UNCAPITALIZED_PER,
                        f'"{surface}" is annotated PER but fully lowercase',
                    )
                )
    return flags
