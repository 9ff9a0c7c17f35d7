"""Uniform tagging interface: a built-in deterministic tagger and an adapter
for external tagger processes speaking newline-delimited JSON on stdin/stdout.

Wire protocol, one JSON object per line:
    handshake  -> {"op": "ping"}            <- {"op": "pong"}
    request    -> {"id": str, "tokens": [str], "target_start": int, "target_end": int}
    response   <- {"id": str, "tags": [str]}
The child's stderr is passed through for logs.
"""

from __future__ import annotations

import itertools
import json
import os
import selectors
import shlex
import subprocess
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .corpus import Document
from .metrics import VALID_TAGS, extract_entities
from .retrieval import RankedCandidate, assemble_context


class TaggingError(RuntimeError):
    """The tagger process failed (exit, timeout, broken pipe)."""


class ProtocolError(RuntimeError):
    """The tagger replied, but the reply violates the wire contract."""


@dataclass(frozen=True)
class TagRequest:
    id: str
    tokens: tuple[str, ...]
    target_start: int
    target_end: int  # exclusive

    def __post_init__(self):
        if not 0 <= self.target_start < self.target_end <= len(self.tokens):
            raise ValueError(
                f"target span [{self.target_start}, {self.target_end}) invalid "
                f"for {len(self.tokens)} tokens"
            )


@dataclass(frozen=True)
class TagResponse:
    id: str
    tags: tuple[str, ...]


class Tagger(Protocol):
    def tag(self, request: TagRequest) -> TagResponse: ...


# Fixed tie-break order for ambiguous surfaces.
_TYPE_ORDER = {"PER": 0, "LOC": 1, "ORG": 2}

_REQUEST_IDS = itertools.count()


def _pick_majority(votes: Mapping[str, int]) -> str:
    return min(votes, key=lambda t: (-votes[t], _TYPE_ORDER[t]))


class MemorizingTagger:
    """Deterministic tagger that memorizes training entity surfaces.

    Tagging is a greedy longest-match of memorized surfaces over the request
    tokens. A surface seen with a single type always gets that type. An
    ambiguous surface is resolved by majority over its occurrences in the
    request's context (outside the target span) that fall inside a resolved,
    unambiguous match there — e.g. "Elantris" occurring within the memorized
    LOC surface "Elantris City" votes LOC. With no such cue the global
    training majority wins; all ties break PER < LOC < ORG.
    """

    def __init__(self, surface_lexicon: Mapping[tuple[str, ...], Mapping[str, int]]):
        self.surface_lexicon = {
            surface: dict(counts) for surface, counts in surface_lexicon.items()
        }
        for surface, counts in self.surface_lexicon.items():
            if not counts or any(n <= 0 for n in counts.values()):
                raise ValueError(f"surface {surface!r} has non-positive counts")
        self._max_len = max((len(s) for s in self.surface_lexicon), default=0)

    def _matches(self, tokens: Sequence[str]) -> list[tuple[int, int, tuple[str, ...]]]:
        matches = []
        pos = 0
        n = len(tokens)
        while pos < n:
            found = None
            for length in range(min(self._max_len, n - pos), 0, -1):
                surface = tuple(tokens[pos : pos + length])
                if surface in self.surface_lexicon:
                    found = (pos, pos + length, surface)
                    break
            if found:
                matches.append(found)
                pos = found[1]
            else:
                pos += 1
        return matches

    def _resolve(
        self,
        surface: tuple[str, ...],
        tokens: Sequence[str],
        target_start: int,
        target_end: int,
        resolved_spans: list[tuple[int, int, str]],
    ) -> str:
        counts = self.surface_lexicon[surface]
        if len(counts) == 1:
            return next(iter(counts))
        votes: Counter[str] = Counter()
        size = len(surface)
        for p in range(len(tokens) - size + 1):
            if p < target_end and p + size > target_start:
                continue  # overlaps the target span
            if tuple(tokens[p : p + size]) != surface:
                continue
            for start, end, etype in resolved_spans:
                if start <= p and p + size <= end:
                    votes[etype] += 1
                    break
        if votes:
            return _pick_majority(votes)
        return _pick_majority(counts)

    def tag(self, request: TagRequest) -> TagResponse:
        tokens = request.tokens
        matches = self._matches(tokens)
        resolved_spans = [
            (start, end, next(iter(self.surface_lexicon[surface])))
            for start, end, surface in matches
            if len(self.surface_lexicon[surface]) == 1
        ]
        tags = ["O"] * len(tokens)
        for start, end, surface in matches:
            etype = self._resolve(
                surface, tokens, request.target_start, request.target_end, resolved_spans
            )
            tags[start] = f"B-{etype}"
            for p in range(start + 1, end):
                tags[p] = f"I-{etype}"
        return TagResponse(id=request.id, tags=tuple(tags))


def train_memorizing(train_docs: Sequence[Document]) -> MemorizingTagger:
    """Memorize every gold entity surface form with its per-type counts."""
    lexicon: dict[tuple[str, ...], Counter] = {}
    for doc in train_docs:
        for sentence in doc.sentences:
            texts = sentence.texts()
            for entity in extract_entities(sentence.tags()):
                surface = tuple(texts[entity.start : entity.end + 1])
                lexicon.setdefault(surface, Counter())[entity.etype] += 1
    return MemorizingTagger(lexicon)


class _LineReader:
    """Buffered line reader over a pipe fd with a select-based timeout."""

    def __init__(self, stream):
        self._stream = stream
        self._buffer = b""
        self._selector = selectors.DefaultSelector()
        self._selector.register(stream, selectors.EVENT_READ)

    def readline(self, timeout: float | None) -> str | None:
        """One decoded line without trailing newline; None on EOF."""
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line, self._buffer = self._buffer[:newline], self._buffer[newline + 1 :]
                return line.decode("utf-8")
            if not self._selector.select(timeout):
                raise TaggingError(f"tagger produced no output within {timeout}s")
            chunk = os.read(self._stream.fileno(), 65536)
            if not chunk:
                if self._buffer:
                    line, self._buffer = self._buffer, b""
                    return line.decode("utf-8")
                return None
            self._buffer += chunk

    def close(self):
        self._selector.close()


class ExternalProcessTagger:
    """Adapter wrapping one child tagger process; requests are serialized."""

    def __init__(self, command: str | Sequence[str], timeout: float = 120.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.command = argv
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=None
            )
        except OSError as exc:
            raise TaggingError(f"cannot start tagger {argv!r}: {exc}") from exc
        self._reader = _LineReader(self._proc.stdout)
        self._handshake()

    def _send(self, payload: dict) -> None:
        try:
            self._proc.stdin.write((json.dumps(payload) + "\n").encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TaggingError(
                f"tagger process died (exit code {self._proc.poll()})"
            ) from exc

    def _receive(self) -> dict:
        line = self._reader.readline(self.timeout)
        if line is None:
            raise TaggingError(
                f"tagger closed its output (exit code {self._proc.poll()})"
            )
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"tagger sent invalid JSON: {line!r}") from exc
        if not isinstance(payload, dict):
            raise ProtocolError(f"tagger sent a non-object line: {line!r}")
        return payload

    def _handshake(self) -> None:
        self._send({"op": "ping"})
        reply = self._receive()
        if reply.get("op") != "pong":
            raise ProtocolError(f"expected pong handshake, got {reply!r}")

    def tag(self, request: TagRequest) -> TagResponse:
        self._send(
            {
                "id": request.id,
                "tokens": list(request.tokens),
                "target_start": request.target_start,
                "target_end": request.target_end,
            }
        )
        reply = self._receive()
        if reply.get("id") != request.id:
            raise ProtocolError(
                f"response id {reply.get('id')!r} does not match request {request.id!r}"
            )
        tags = reply.get("tags")
        if not isinstance(tags, list) or len(tags) != len(request.tokens):
            got = len(tags) if isinstance(tags, list) else tags
            raise ProtocolError(
                f"response for {request.id!r} covers {got} tokens, expected {len(request.tokens)}"
            )
        bad = [t for t in tags if t not in VALID_TAGS]
        if bad:
            raise ProtocolError(f"response for {request.id!r} carries invalid tags: {bad[:3]}")
        return TagResponse(id=request.id, tags=tuple(tags))

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._reader.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def tag_with_context(
    tagger: Tagger, doc: Document, i: int, retrieved: Sequence[RankedCandidate]
) -> list[str]:
    """Tag sentence i with the retrieved context attached; return the target's tags."""
    example = assemble_context(doc, i, retrieved)
    request = TagRequest(
        id=f"{doc.id}:{i}#{next(_REQUEST_IDS)}",
        tokens=example.tokens,
        target_start=example.target_start,
        target_end=example.target_end,
    )
    response = tagger.tag(request)
    if len(response.tags) != len(request.tokens):
        raise ProtocolError(
            f"tagger returned {len(response.tags)} tags for {len(request.tokens)} tokens"
        )
    return list(response.tags[example.target_start : example.target_end])
