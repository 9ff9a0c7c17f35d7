"""Perfect re-ranker simulation: score each candidate context sentence by how
many token-level tag errors it removes, keep only the most helpful ones.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import Document
from .metrics import token_error_count
from .retrieval import (
    HEURISTICS,
    RankedCandidate,
    SentenceIndex,
    bm25_score,
    build_index,
)
from .tagging import Tagger, TaggingError, tag_with_context


@dataclass(frozen=True)
class OracleConfig:
    retain: int
    candidate_count: int = 16
    positive_only: bool = True
    exclusion_radius: int = 0

    def __post_init__(self):
        if self.retain < 1:
            raise ValueError("retain must be >= 1")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if self.retain > self.candidate_count:
            raise ValueError("retain cannot exceed candidate_count")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion_radius must be >= 0")


@dataclass(frozen=True)
class OracleDecision:
    target: tuple[str, int]  # (doc_id, sentence index)
    ranked: tuple[tuple[RankedCandidate, int], ...]
    retained: tuple[int, ...]

    def retained_distances(self) -> list[int]:
        return [index - self.target[1] for index in self.retained]


def oracle_rank(
    doc: Document,
    i: int,
    candidates: Sequence[RankedCandidate],
    tagger: Tagger,
    gold: Sequence[str],
) -> list[tuple[RankedCandidate, int]]:
    """Score every candidate individually by its error delta against no context.

    delta = errors(no context) - errors(candidate attached), counted on the
    target sentence's tokens only; positive means the candidate helps. The
    result is sorted best-first, ties broken by proximity then index.
    """
    try:
        baseline_errors = token_error_count(gold, tag_with_context(tagger, doc, i, []))
    except TaggingError as exc:
        raise TaggingError(f"baseline tagging failed for {doc.id}:{i}") from exc
    ranked = []
    for candidate in candidates:
        try:
            with_context = tag_with_context(tagger, doc, i, [candidate])
        except TaggingError as exc:
            raise TaggingError(
                f"tagging failed for {doc.id}:{i} with candidate "
                f"{candidate.sentence_index}"
            ) from exc
        delta = baseline_errors - token_error_count(gold, with_context)
        ranked.append((candidate, delta))
    ranked.sort(key=lambda pair: (-pair[1], abs(pair[0].distance), pair[0].sentence_index))
    return ranked


def _draw_candidates(
    doc: Document,
    index: SentenceIndex,
    heuristic: str,
    i: int,
    k: int,
    rng: random.Random,
    radius: int,
) -> list[RankedCandidate]:
    """Candidates via the heuristic; with a radius, near sentences leave the pool first."""
    if radius <= 0:
        return HEURISTICS[heuristic](doc, index, i, k, rng)
    if heuristic in ("before", "after", "surrounding"):
        drawn = HEURISTICS[heuristic](doc, index, i, k, rng)
        return [c for c in drawn if abs(c.distance) > radius]
    if heuristic == "random":
        pool = [j for j in range(len(doc)) if abs(j - i) > radius]
    elif heuristic == "samenoun":
        nouns = index.noun_sets[i]
        pool = [
            j
            for j in range(len(index))
            if abs(j - i) > radius and nouns and index.noun_sets[j] & nouns
        ]
    elif heuristic == "bm25":
        scored = [
            RankedCandidate(j, bm25_score(index, i, j), j - i)
            for j in range(len(index))
            if abs(j - i) > radius
        ]
        scored = [c for c in scored if c.score > 0.0]
        scored.sort(key=lambda c: (-c.score, abs(c.distance), c.sentence_index))
        return scored[:k]
    else:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    picked = rng.sample(pool, min(k, len(pool)))
    return [RankedCandidate(j, 0.0, j - i) for j in picked]


def oracle_retrieve(
    doc: Document,
    i: int,
    heuristic: str,
    config: OracleConfig,
    tagger: Tagger,
    gold: Sequence[str],
    index: SentenceIndex | None = None,
    rng: random.Random | None = None,
) -> OracleDecision:
    """Draw candidates via the heuristic, rank by error delta, retain the best.

    With positive_only, only candidates that strictly reduce errors are
    retained, so the result may be empty (tag with no context).
    """
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    if index is None:
        index = build_index(doc)
    if rng is None:
        rng = random.Random(0)
    candidates = _draw_candidates(
        doc, index, heuristic, i, config.candidate_count, rng, config.exclusion_radius
    )
    ranked = oracle_rank(doc, i, candidates, tagger, gold)
    retained = []
    for candidate, delta in ranked:
        if len(retained) == config.retain:
            break
        if config.positive_only and delta <= 0:
            break  # ranked is sorted, nothing helpful remains
        retained.append(candidate.sentence_index)
    return OracleDecision(
        target=(doc.id, i), ranked=tuple(ranked), retained=tuple(retained)
    )


@dataclass(frozen=True)
class DistanceHistogram:
    """Counts of |distance| for retained context sentences."""

    counts: Mapping[int, int]
    total: int
    fraction_within_6: float

    def fraction_within(self, radius: int) -> float:
        if self.total == 0:
            return 0.0
        return sum(n for d, n in self.counts.items() if d <= radius) / self.total


def distance_distribution(decisions: Sequence[OracleDecision]) -> DistanceHistogram:
    """Histogram over |distance| of all retained sentences across decisions."""
    counts: Counter[int] = Counter()
    for decision in decisions:
        for distance in decision.retained_distances():
            counts[abs(distance)] += 1
    total = sum(counts.values())
    within = sum(n for d, n in counts.items() if d <= 6)
    return DistanceHistogram(
        counts=dict(sorted(counts.items())),
        total=total,
        fraction_within_6=within / total if total else 0.0,
    )
