"""Entity extraction from BIO tag sequences and exact-match P/R/F1 scoring.

Decoding is lenient: an ``I-X`` tag with no same-type entity open starts a
new entity instead of being dropped. Every zero-denominator ratio is 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

ENTITY_TYPES = ("PER", "LOC", "ORG")

VALID_TAGS = frozenset(
    ["O"] + [f"{prefix}-{etype}" for etype in ENTITY_TYPES for prefix in ("B", "I")]
)


@dataclass(frozen=True, order=True)
class Entity:
    """An entity span; ``start`` and ``end`` are inclusive token indices."""

    etype: str
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid entity span [{self.start}, {self.end}]")


@dataclass(frozen=True)
class TypeScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    """Micro-averaged scores plus a per-entity-type breakdown."""

    precision: float
    recall: float
    f1: float
    per_type: Mapping[str, TypeScores]
    support: Mapping[str, int]


def extract_entities(tags: Sequence[str]) -> set[Entity]:
    """Decode a BIO tag sequence into its set of maximal entity spans.

    ``B-X`` always opens an entity; ``I-X`` extends an open entity of the
    same type and otherwise opens a new one; ``O`` or a type change closes
    whatever is open.
    """
    entities: set[Entity] = set()
    open_type: str | None = None
    open_start = 0
    for i, tag in enumerate(tags):
        if tag == "O":
            if open_type is not None:
                entities.add(Entity(open_type, open_start, i - 1))
                open_type = None
            continue
        prefix, etype = tag.split("-", 1)
        if prefix == "B" or etype != open_type:
            if open_type is not None:
                entities.add(Entity(open_type, open_start, i - 1))
            open_type = etype
            open_start = i
    if open_type is not None:
        entities.add(Entity(open_type, open_start, len(tags) - 1))
    return entities


def _prf(n_correct: int, n_pred: int, n_gold: int) -> TypeScores:
    precision = n_correct / n_pred if n_pred > 0 else 0.0
    recall = n_correct / n_gold if n_gold > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return TypeScores(precision, recall, f1)


def evaluate(
    gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]
) -> MetricsReport:
    """Score predicted tag sequences against gold ones.

    An entity counts as matched iff its (type, start, end) triple is exactly
    reproduced within the same sentence. Raises ValueError on any shape
    mismatch, naming the first offending sentence.
    """
    if len(gold) != len(pred):
        raise ValueError(
            f"sentence count mismatch: {len(gold)} gold vs {len(pred)} predicted"
        )
    for idx, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ValueError(
                f"sentence {idx}: gold has {len(g)} tags but prediction has {len(p)}"
            )

    gold_by_type: dict[str, int] = {t: 0 for t in ENTITY_TYPES}
    pred_by_type: dict[str, int] = {t: 0 for t in ENTITY_TYPES}
    correct_by_type: dict[str, int] = {t: 0 for t in ENTITY_TYPES}
    for g, p in zip(gold, pred):
        gold_entities = extract_entities(g)
        pred_entities = extract_entities(p)
        for e in gold_entities:
            gold_by_type[e.etype] += 1
        for e in pred_entities:
            pred_by_type[e.etype] += 1
        for e in gold_entities & pred_entities:
            correct_by_type[e.etype] += 1

    micro = _prf(
        sum(correct_by_type.values()),
        sum(pred_by_type.values()),
        sum(gold_by_type.values()),
    )
    per_type = {
        t: _prf(correct_by_type[t], pred_by_type[t], gold_by_type[t])
        for t in ENTITY_TYPES
    }
    return MetricsReport(
        precision=micro.precision,
        recall=micro.recall,
        f1=micro.f1,
        per_type=per_type,
        support={t: gold_by_type[t] for t in ENTITY_TYPES},
    )


def token_error_count(gold: Sequence[str], pred: Sequence[str]) -> int:
    """Number of positions where the predicted tag differs from gold."""
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    return sum(1 for g, p in zip(gold, pred) if g != p)


def validate_tags(tags: Iterable[str]) -> None:
    """Raise ValueError if any tag is outside the valid BIO tag set."""
    for tag in tags:
        if tag not in VALID_TAGS:
            raise ValueError(f"unknown tag {tag!r}")
