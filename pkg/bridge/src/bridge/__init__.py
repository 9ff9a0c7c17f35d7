"""Transformer tagger bridge: fine-tune per fold, serve over JSON lines."""

from .data import LABELS, TaggedDocument, TaggedSentence, read_conll_dir
from .model import BridgeConfig, finetune
from .server import TaggerServer

__all__ = [
    "LABELS",
    "TaggedDocument",
    "TaggedSentence",
    "read_conll_dir",
    "BridgeConfig",
    "finetune",
    "TaggerServer",
]
