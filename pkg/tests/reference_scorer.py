"""Reference BIO scorer for differential tests.

Faithful transliteration of the seqeval library's default-mode algorithm:
the prev-tag chunk state machine, list-of-lists flattening with an O
separator, set-based exact matching, and zero-denominator ratios mapping
to 0. Kept deliberately independent of the implementation under test,
which uses a direct forward-scan decoder instead.
"""

from __future__ import annotations


def _end_of_chunk(prev_tag: str, tag: str, prev_type: str, type_: str) -> bool:
    chunk_end = False
    if prev_tag == "E":
        chunk_end = True
    if prev_tag == "S":
        chunk_end = True
    if prev_tag == "B" and tag == "B":
        chunk_end = True
    if prev_tag == "B" and tag == "S":
        chunk_end = True
    if prev_tag == "B" and tag == "O":
        chunk_end = True
    if prev_tag == "I" and tag == "B":
        chunk_end = True
    if prev_tag == "I" and tag == "S":
        chunk_end = True
    if prev_tag == "I" and tag == "O":
        chunk_end = True
    if prev_tag != "O" and prev_tag != "." and prev_type != type_:
        chunk_end = True
    return chunk_end


def _start_of_chunk(prev_tag: str, tag: str, prev_type: str, type_: str) -> bool:
    chunk_start = False
    if tag == "B":
        chunk_start = True
    if tag == "S":
        chunk_start = True
    if prev_tag == "E" and tag == "E":
        chunk_start = True
    if prev_tag == "E" and tag == "I":
        chunk_start = True
    if prev_tag == "S" and tag == "E":
        chunk_start = True
    if prev_tag == "S" and tag == "I":
        chunk_start = True
    if prev_tag == "O" and tag == "E":
        chunk_start = True
    if prev_tag == "O" and tag == "I":
        chunk_start = True
    if tag != "O" and tag != "." and prev_type != type_:
        chunk_start = True
    return chunk_start


def get_entities(seq):
    """(type, start, end) chunks with global offsets, default (lenient) mode."""
    if any(isinstance(s, list) for s in seq):
        seq = [item for sublist in seq for item in sublist + ["O"]]
    prev_tag = "O"
    prev_type = ""
    begin_offset = 0
    chunks = []
    for i, chunk in enumerate(list(seq) + ["O"]):
        tag = chunk[0]
        type_ = chunk[1:].split("-", maxsplit=1)[-1] or "_"
        if _end_of_chunk(prev_tag, tag, prev_type, type_):
            chunks.append((prev_type, begin_offset, i - 1))
        if _start_of_chunk(prev_tag, tag, prev_type, type_):
            begin_offset = i
        prev_tag = tag
        prev_type = type_
    return chunks


def _prf(n_correct: int, n_pred: int, n_true: int):
    p = n_correct / n_pred if n_pred > 0 else 0
    r = n_correct / n_true if n_true > 0 else 0
    f = 2 * p * r / (p + r) if p + r > 0 else 0
    return p, r, f


def reference_report(gold, pred):
    """Micro and per-type precision/recall/f1 plus per-type support.

    Returns {"micro": (p, r, f), "per_type": {t: (p, r, f)}, "support": {t: n}}
    for every type present in gold or pred.
    """
    true_entities = set(get_entities([list(s) for s in gold]))
    pred_entities = set(get_entities([list(s) for s in pred]))
    report = {
        "micro": _prf(
            len(true_entities & pred_entities), len(pred_entities), len(true_entities)
        ),
        "per_type": {},
        "support": {},
    }
    types = {t for t, _, _ in true_entities | pred_entities}
    for etype in types:
        true_t = {e for e in true_entities if e[0] == etype}
        pred_t = {e for e in pred_entities if e[0] == etype}
        report["per_type"][etype] = _prf(
            len(true_t & pred_t), len(pred_t), len(true_t)
        )
        report["support"][etype] = len(true_t)
    return report
