from pathlib import Path

import pytest

CORPUS_WORDS = [
    "Zephyra", "City", "Lord", "Sarene", "Kae", "the", "road", "to",
    "rain", "fell", "all", "day", "waited", "alone", "smiled", "at",
    "crowd", "reached", "before", "dawn", "rode", "ahead", "of", "them",
    ".", ",", "stretched", "east", "they", "it",
]


def write_doc(path: Path, sentences):
    lines = []
    for sentence in sentences:
        lines.extend(f"{tok}\t{tag}" for tok, tag in sentence)
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    for n in range(4):
        is_loc = n % 2 == 0
        cue = (
            [("they", "O"), ("reached", "O"), ("Zephyra", "B-LOC"),
             ("City", "I-LOC"), (".", "O")]
            if is_loc
            else [("Lord", "B-PER"), ("Zephyra", "I-PER"), ("rode", "O"), (".", "O")]
        )
        target_tag = "B-LOC" if is_loc else "B-PER"
        write_doc(
            root / f"novel_{n}.conll",
            [
                [("rain", "O"), ("fell", "O"), ("all", "O"), ("day", "O"), (".", "O")],
                [("Zephyra", target_tag), ("waited", "O"), ("alone", "O"), (".", "O")],
                [("Sarene", "B-PER"), ("smiled", "O"), ("at", "O"),
                 ("the", "O"), ("crowd", "O"), (".", "O")],
                cue,
                [("the", "O"), ("road", "O"), ("to", "O"), ("Kae", "B-LOC"),
                 ("stretched", "O"), ("east", "O"), (".", "O")],
            ],
        )
    return root


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> Path:
    """A randomly initialized word-level BERT small enough for CPU tests."""
    from transformers import BertConfig, BertForTokenClassification, BertTokenizerFast

    path = tmp_path_factory.mktemp("checkpoint")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + CORPUS_WORDS
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab), encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=False)
    tokenizer.save_pretrained(path)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
        num_labels=7,
    )
    BertForTokenClassification(config).save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def trained_model(tmp_path_factory, corpus_dir, tiny_checkpoint) -> Path:
    from bridge.data import read_conll_dir
    from bridge.model import BridgeConfig, finetune

    out = tmp_path_factory.mktemp("model") / "fold0"
    config = BridgeConfig(
        fold_model_path=str(out),
        base_checkpoint=str(tiny_checkpoint),
        epochs=2,
        learning_rate=2e-5,
        max_input_tokens=64,
        batch_size=4,
        seed=1,
    )
    finetune(read_conll_dir(corpus_dir), config)
    return out
