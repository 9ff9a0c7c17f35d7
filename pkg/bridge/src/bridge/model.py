"""Fine-tuning of a pretrained token-classification encoder.

Each training example is one target sentence, optionally concatenated with
context sentences from the same document (document order preserved). The
loss is computed on the target sentence's first-subword positions only;
context tokens participate as input.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .data import LABEL_TO_ID, LABELS, TaggedDocument


@dataclass
class BridgeConfig:
    fold_model_path: str
    base_checkpoint: str = "bert-base-cased"
    epochs: int = 2
    learning_rate: float = 2e-5
    max_input_tokens: int = 512
    batch_size: int = 8
    context_mode: str = "random"  # none | random | surrounding
    context_k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.context_mode not in ("none", "random", "surrounding"):
            raise ValueError(f"unknown context_mode {self.context_mode!r}")


@dataclass
class TrainExample:
    """Target sentence plus context sentences, each with its document position."""

    target_position: int
    target_tokens: list[str]
    target_tags: list[str]
    context: list[tuple[int, list[str]]] = field(default_factory=list)

    def flattened(self) -> tuple[list[str], list[int], tuple[int, int]]:
        """Tokens in document order, per-token label ids (-100 off target),
        and the target span."""
        pieces = sorted(
            self.context + [(self.target_position, self.target_tokens)]
        )
        tokens: list[str] = []
        labels: list[int] = []
        span = (0, 0)
        for position, piece_tokens in pieces:
            if position == self.target_position:
                span = (len(tokens), len(tokens) + len(piece_tokens))
                labels.extend(LABEL_TO_ID[t] for t in self.target_tags)
            else:
                labels.extend([-100] * len(piece_tokens))
            tokens.extend(piece_tokens)
        return tokens, labels, span

    def drop_farthest_context(self) -> bool:
        """Remove the context sentence farthest from the target; False if none left."""
        if not self.context:
            return False
        farthest = max(
            range(len(self.context)),
            key=lambda n: abs(self.context[n][0] - self.target_position),
        )
        del self.context[farthest]
        return True


def build_examples(
    docs: list[TaggedDocument], mode: str, k: int, rng: random.Random
) -> list[TrainExample]:
    examples = []
    for doc in docs:
        n = len(doc.sentences)
        for i, sentence in enumerate(doc.sentences):
            example = TrainExample(
                target_position=i,
                target_tokens=list(sentence.tokens),
                target_tags=list(sentence.tags),
            )
            picked: list[int] = []
            if mode == "random" and n > 1 and rng.random() < 0.5:
                pool = [j for j in range(n) if j != i]
                picked = rng.sample(pool, min(k, len(pool)))
            elif mode == "surrounding":
                half = k // 2
                picked = [j for j in range(i - half, i + half + 1)
                          if j != i and 0 <= j < n]
            example.context = [
                (j, list(doc.sentences[j].tokens)) for j in sorted(picked)
            ]
            examples.append(example)
    return examples


def encode_example(example: TrainExample, tokenizer, max_input_tokens: int):
    """Tokenize with context, shrinking over-long inputs by dropping the
    farthest context sentence first; the target sentence is never dropped."""
    while True:
        tokens, labels, _ = example.flattened()
        encoding = tokenizer(
            tokens,
            is_split_into_words=True,
            truncation=False,
            return_tensors=None,
        )
        if len(encoding["input_ids"]) <= max_input_tokens:
            break
        if not example.drop_farthest_context():
            # a bare sentence that still overflows: hard-truncate it
            encoding = tokenizer(
                tokens,
                is_split_into_words=True,
                truncation=True,
                max_length=max_input_tokens,
                return_tensors=None,
            )
            break
    word_ids = encoding.word_ids()
    label_ids = []
    previous = None
    for word_id in word_ids:
        if word_id is None or word_id == previous:
            label_ids.append(-100)  # special token or continuation subword
        else:
            label_ids.append(labels[word_id])
        previous = word_id
    encoding["labels"] = label_ids
    return encoding


def finetune(docs: list[TaggedDocument], config: BridgeConfig) -> str:
    """Fine-tune the checkpoint on the documents; returns the saved model path."""
    import torch
    from transformers import AutoModelForTokenClassification, AutoTokenizer

    if not docs or all(not d.sentences for d in docs):
        raise ValueError("training set is empty")

    try:
        tokenizer = AutoTokenizer.from_pretrained(config.base_checkpoint)
        model = AutoModelForTokenClassification.from_pretrained(
            config.base_checkpoint,
            num_labels=len(LABELS),
            id2label={i: label for i, label in enumerate(LABELS)},
            label2id=LABEL_TO_ID,
        )
    except (OSError, ValueError) as exc:
        raise RuntimeError(
            f"cannot load checkpoint {config.base_checkpoint!r}: {exc}"
        ) from exc

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    examples = build_examples(docs, config.context_mode, config.context_k, rng)
    encoded = [
        encode_example(example, tokenizer, config.max_input_tokens)
        for example in examples
    ]

    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    pad_id = tokenizer.pad_token_id or 0
    for _ in range(config.epochs):
        order = list(range(len(encoded)))
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = [encoded[n] for n in order[start : start + config.batch_size]]
            width = max(len(e["input_ids"]) for e in batch)

            def pad(values, fill):
                return [list(v) + [fill] * (width - len(v)) for v in values]

            input_ids = torch.tensor(pad([e["input_ids"] for e in batch], pad_id))
            attention = torch.tensor(pad([e["attention_mask"] for e in batch], 0))
            labels = torch.tensor(pad([e["labels"] for e in batch], -100))
            optimizer.zero_grad()
            loss = model(
                input_ids=input_ids, attention_mask=attention, labels=labels
            ).loss
            loss.backward()
            optimizer.step()

    out = Path(config.fold_model_path)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)
