"""Long-running protocol peer: JSON lines in on stdin, tags out on stdout.

Handshake: {"op": "ping"} -> {"op": "pong"}. Every tag request is answered
with word-level BIO tags covering all request tokens (first-subword
pooling). Over-long inputs drop context tokens farthest from the target
span; target tokens are never dropped and dropped context tokens are
reported as O.
"""

from __future__ import annotations

import json
import sys

from .data import ID_TO_LABEL


def _context_by_closeness(n_tokens: int, target_start: int, target_end: int) -> list[int]:
    """Context token positions ordered nearest-to-target first."""
    def distance(p: int) -> int:
        return target_start - p if p < target_start else p - target_end + 1

    positions = [p for p in range(n_tokens) if p < target_start or p >= target_end]
    return sorted(positions, key=lambda p: (distance(p), p))


class TaggerServer:
    def __init__(self, model_path: str, max_input_tokens: int = 512):
        import torch
        from transformers import AutoModelForTokenClassification, AutoTokenizer

        self.torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForTokenClassification.from_pretrained(model_path)
        self.model.eval()
        self.max_input_tokens = max_input_tokens
        torch.manual_seed(0)

    def predict(self, tokens: list[str], target_start: int, target_end: int) -> list[str]:
        if not 0 <= target_start < target_end <= len(tokens):
            raise ValueError("invalid target span")
        subword_counts = [
            max(1, len(self.tokenizer.tokenize(token))) for token in tokens
        ]
        budget = self.max_input_tokens - 2  # leave room for the special tokens
        kept_set = set(range(target_start, target_end))
        used = sum(subword_counts[p] for p in kept_set)
        for p in _context_by_closeness(len(tokens), target_start, target_end):
            if used + subword_counts[p] > budget:
                break
            kept_set.add(p)
            used += subword_counts[p]
        kept = sorted(kept_set)
        inputs = self.tokenizer(
            [tokens[p] for p in kept],
            is_split_into_words=True,
            truncation=True,
            max_length=self.max_input_tokens,
            return_tensors="pt",
        )
        with self.torch.no_grad():
            logits = self.model(**inputs).logits[0]
        predictions = logits.argmax(dim=-1).tolist()
        word_ids = inputs.word_ids(0)
        tags = ["O"] * len(tokens)
        previous = None
        for position, word_id in enumerate(word_ids):
            if word_id is None or word_id == previous:
                continue
            tags[kept[word_id]] = ID_TO_LABEL[predictions[position]]
            previous = word_id
        return tags

    def handle_line(self, line: str) -> dict:
        try:
            message = json.loads(line)
            if not isinstance(message, dict):
                raise ValueError("not a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            return {"op": "error", "message": f"malformed request: {exc}"}
        if message.get("op") == "ping":
            return {"op": "pong"}
        try:
            tags = self.predict(
                list(message["tokens"]),
                int(message["target_start"]),
                int(message["target_end"]),
            )
            return {"id": message["id"], "tags": tags}
        except (KeyError, TypeError, ValueError) as exc:
            return {"op": "error", "message": f"bad request: {exc}"}

    def serve_forever(self, stdin=None, stdout=None) -> None:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for raw in stdin:
            line = raw.strip()
            if not line:
                continue
            reply = self.handle_line(line)
            stdout.write(json.dumps(reply) + "\n")
            stdout.flush()
