"""Per-document sentence index and the six context retrieval heuristics.

Positional heuristics (before/after/surrounding) pick window neighbours;
content heuristics (random/samenoun/bm25) pick from the whole document.
Retrieved sentences are concatenated in document order around the target,
never reordered.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Protocol, Sequence

from .corpus import Document, Sentence


@dataclass(frozen=True)
class Bm25Params:
    """Okapi BM25 parameters: k1 saturates term frequency, b normalizes length."""

    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class RankedCandidate:
    """A candidate context sentence with its score and signed distance to the target."""

    sentence_index: int
    score: float
    distance: int

    def __post_init__(self):
        if self.distance == 0:
            raise ValueError("a sentence is never its own context")


@dataclass(frozen=True)
class ContextualExample:
    """A target sentence flattened together with its context, in document order."""

    doc_id: str
    target_index: int
    sentence_indices: tuple[int, ...]
    tokens: tuple[str, ...]
    target_mask: tuple[bool, ...]

    @property
    def target_start(self) -> int:
        return self.target_mask.index(True)

    @property
    def target_end(self) -> int:
        """Exclusive end offset of the target span."""
        return len(self.target_mask) - tuple(reversed(self.target_mask)).index(True)


class NounDetector(Protocol):
    def __call__(self, sentence: Sentence) -> set[str]: ...


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("ctxner.data").joinpath(name).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


class LexiconNounDetector:
    """Default noun detector: capitalization plus a bundled common-noun lexicon.

    A token counts as a noun when it is capitalized and not sentence-initial,
    when its lowercase form is in the common-noun lexicon, or when it is the
    sentence-initial capitalized token and not a function word. Output is
    lowercased.
    """

    def __init__(self, lexicon: frozenset[str] | None = None,
                 function_words: frozenset[str] | None = None):
        self.lexicon = lexicon if lexicon is not None else _load_wordlist("common_nouns.txt")
        self.function_words = (
            function_words if function_words is not None else _load_wordlist("function_words.txt")
        )

    def __call__(self, sentence: Sentence) -> set[str]:
        nouns: set[str] = set()
        for position, token in enumerate(sentence.tokens):
            text = token.text
            lowered = text.lower()
            capitalized = text[0].isupper()
            if capitalized and position > 0:
                nouns.add(lowered)
            elif lowered in self.lexicon:
                nouns.add(lowered)
            elif capitalized and position == 0 and lowered not in self.function_words:
                nouns.add(lowered)
        return nouns


_DEFAULT_DETECTOR: LexiconNounDetector | None = None


def default_noun_detector() -> LexiconNounDetector:
    global _DEFAULT_DETECTOR
    if _DEFAULT_DETECTOR is None:
        _DEFAULT_DETECTOR = LexiconNounDetector()
    return _DEFAULT_DETECTOR


def detect_nouns(sentence: Sentence, detector: NounDetector | None = None) -> set[str]:
    """Set of normalized nouns found in the sentence by the given detector."""
    return (detector or default_noun_detector())(sentence)


def normalize_terms(sentence: Sentence) -> list[str]:
    """Lowercased tokens with punctuation-only tokens stripped; no stemming."""
    return [
        t.text.lower()
        for t in sentence.tokens
        if any(c.isalnum() for c in t.text)
    ]


@dataclass(frozen=True)
class SentenceIndex:
    """Immutable per-document term statistics and per-sentence noun sets."""

    doc_id: str
    term_frequencies: tuple[Counter, ...]
    document_frequencies: Counter
    sentence_lengths: tuple[int, ...]
    avg_sentence_length: float
    noun_sets: tuple[frozenset[str], ...]
    params: Bm25Params = field(default_factory=Bm25Params)

    def __len__(self) -> int:
        return len(self.term_frequencies)


def build_index(
    doc: Document,
    detector: NounDetector | None = None,
    params: Bm25Params | None = None,
) -> SentenceIndex:
    """Precompute BM25 statistics and noun sets for one document."""
    if not doc.sentences:
        raise ValueError(f"document {doc.id} is empty")
    detector = detector or default_noun_detector()
    term_frequencies = tuple(Counter(normalize_terms(s)) for s in doc.sentences)
    document_frequencies: Counter = Counter()
    for tf in term_frequencies:
        document_frequencies.update(tf.keys())
    lengths = tuple(sum(tf.values()) for tf in term_frequencies)
    return SentenceIndex(
        doc_id=doc.id,
        term_frequencies=term_frequencies,
        document_frequencies=document_frequencies,
        sentence_lengths=lengths,
        avg_sentence_length=sum(lengths) / len(lengths),
        noun_sets=tuple(frozenset(detector(s)) for s in doc.sentences),
        params=params or Bm25Params(),
    )


def _check_target(length: int, i: int) -> None:
    if not 0 <= i < length:
        raise ValueError(f"target index {i} out of range for document of {length} sentences")


def _window(indices: Sequence[int], i: int) -> list[RankedCandidate]:
    return [RankedCandidate(j, 0.0, j - i) for j in indices]


def retrieve_before(doc: Document | SentenceIndex, i: int, k: int) -> list[RankedCandidate]:
    """The closest k sentences to the left of sentence i."""
    _check_target(len(doc), i)
    return _window(range(max(0, i - k), i), i)


def retrieve_after(doc: Document | SentenceIndex, i: int, k: int) -> list[RankedCandidate]:
    """The closest k sentences to the right of sentence i."""
    _check_target(len(doc), i)
    return _window(range(i + 1, min(len(doc), i + k + 1)), i)


def retrieve_surrounding(doc: Document | SentenceIndex, i: int, k: int) -> list[RankedCandidate]:
    """floor(k/2) sentences on each side; short sides are not compensated."""
    _check_target(len(doc), i)
    half = k // 2
    left = range(max(0, i - half), i)
    right = range(i + 1, min(len(doc), i + half + 1))
    return _window([*left, *right], i)


def retrieve_random(
    doc: Document | SentenceIndex, i: int, k: int, rng: random.Random
) -> list[RankedCandidate]:
    """k distinct sentences drawn uniformly from the document, excluding i."""
    _check_target(len(doc), i)
    pool = [j for j in range(len(doc)) if j != i]
    picked = rng.sample(pool, min(k, len(pool)))
    return _window(picked, i)


def retrieve_samenoun(
    index: SentenceIndex, i: int, k: int, rng: random.Random
) -> list[RankedCandidate]:
    """k sentences sampled among those sharing at least one noun with sentence i.

    Sentences without any common noun are never candidates; when the input
    sentence has no detected noun the result is empty.
    """
    _check_target(len(index), i)
    target_nouns = index.noun_sets[i]
    pool = [
        j
        for j in range(len(index))
        if j != i and target_nouns and index.noun_sets[j] & target_nouns
    ]
    picked = rng.sample(pool, min(k, len(pool)))
    return _window(picked, i)


def bm25_score(index: SentenceIndex, i: int, j: int, params: Bm25Params | None = None) -> float:
    """Okapi BM25 score of candidate sentence j for query sentence i.

    Uses the non-negative idf ln(1 + (N - n + 0.5)/(n + 0.5)) and sums the
    saturated term-frequency factor over the query's distinct terms.
    """
    if i == j:
        raise ValueError("query and candidate sentence must differ")
    params = params or index.params
    n_sentences = len(index)
    candidate_tf = index.term_frequencies[j]
    norm = 1.0 - params.b + params.b * (
        index.sentence_lengths[j] / index.avg_sentence_length
    )
    score = 0.0
    for term in index.term_frequencies[i].keys():
        tf = candidate_tf.get(term, 0)
        if tf == 0:
            continue
        n = index.document_frequencies[term]
        idf = math.log(1.0 + (n_sentences - n + 0.5) / (n + 0.5))
        score += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    return score


def retrieve_bm25(index: SentenceIndex, i: int, k: int) -> list[RankedCandidate]:
    """Top-k sentences by BM25 similarity to sentence i; zero scores never retrieved.

    Ties are broken by proximity to the target, then by sentence index.
    """
    _check_target(len(index), i)
    scored = [
        RankedCandidate(j, bm25_score(index, i, j), j - i)
        for j in range(len(index))
        if j != i
    ]
    scored = [c for c in scored if c.score > 0.0]
    scored.sort(key=lambda c: (-c.score, abs(c.distance), c.sentence_index))
    return scored[:k]


def assemble_context(
    doc: Document, i: int, retrieved: Sequence[RankedCandidate]
) -> ContextualExample:
    """Flatten sentence i and its retrieved context in document order.

    Duplicate candidates collapse; the target mask marks exactly the target
    sentence's tokens.
    """
    _check_target(len(doc), i)
    indices = {i}
    for candidate in retrieved:
        j = candidate.sentence_index
        if not 0 <= j < len(doc):
            raise ValueError(f"candidate index {j} out of range")
        indices.add(j)
    ordered = tuple(sorted(indices))
    tokens: list[str] = []
    mask: list[bool] = []
    for j in ordered:
        texts = doc.sentences[j].texts()
        tokens.extend(texts)
        mask.extend([j == i] * len(texts))
    return ContextualExample(
        doc_id=doc.id,
        target_index=i,
        sentence_indices=ordered,
        tokens=tuple(tokens),
        target_mask=tuple(mask),
    )


# Uniform dispatch used by the oracle and the experiment grid. Each entry
# maps (doc, index, i, k, rng) to ranked candidates.
HeuristicFn = Callable[[Document, SentenceIndex, int, int, random.Random], list[RankedCandidate]]

HEURISTICS: dict[str, HeuristicFn] = {
    "before": lambda doc, index, i, k, rng: retrieve_before(doc, i, k),
    "after": lambda doc, index, i, k, rng: retrieve_after(doc, i, k),
    "surrounding": lambda doc, index, i, k, rng: retrieve_surrounding(doc, i, k),
    "random": lambda doc, index, i, k, rng: retrieve_random(doc, i, k, rng),
    "samenoun": lambda doc, index, i, k, rng: retrieve_samenoun(index, i, k, rng),
    "bm25": lambda doc, index, i, k, rng: retrieve_bm25(index, i, k),
}
