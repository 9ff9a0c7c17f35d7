import random
from pathlib import Path

import pytest

from ctxner.corpus import Document, Sentence, Token

FIXTURES = Path(__file__).parent / "fixtures"

# Hand-counted totals for the bundled fixture corpus.
MINI_CORPUS_DOCS = 6
MINI_CORPUS_COUNTS = {"PER": 24, "LOC": 13, "ORG": 8}


@pytest.fixture(scope="session")
def mini_corpus_dir() -> Path:
    return FIXTURES / "mini_corpus"


def make_sentence(doc_index: int, words, tags=None) -> Sentence:
    if tags is None:
        tags = ["O"] * len(words)
    return Sentence(doc_index, tuple(Token(w, t) for w, t in zip(words, tags)))


def make_doc(doc_id: str, sentences_words, sentences_tags=None) -> Document:
    sentences_tags = sentences_tags or [None] * len(sentences_words)
    return Document(
        id=doc_id,
        sentences=tuple(
            make_sentence(i, words, tags)
            for i, (words, tags) in enumerate(zip(sentences_words, sentences_tags))
        ),
    )


def random_tag_sequence(rng: random.Random, length: int) -> list[str]:
    tags = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"]
    return [rng.choice(tags) for _ in range(length)]


def random_document(rng: random.Random, doc_id: str, n_sentences: int,
                    vocab=None) -> Document:
    vocab = vocab or [
        "Alda", "Brin", "Corin", "dale", "elm", "fen", "gate", "hill",
        "Isen", "Jarn", "keep", "lane", "moor", "north", "oak", "pond",
        "Quill", "rock", "Sable", "thorn", ",", ".",
    ]
    sentences = []
    for i in range(n_sentences):
        length = rng.randint(1, 12)
        words = [rng.choice(vocab) for _ in range(length)]
        sentences.append(make_sentence(i, words))
    return Document(id=doc_id, sentences=tuple(sentences))
