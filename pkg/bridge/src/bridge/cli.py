"""bridge train / bridge serve entry points."""

from __future__ import annotations

import argparse
import sys

from .data import read_conll_dir
from .model import BridgeConfig, finetune
from .server import TaggerServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="Transformer tagger speaking the JSON-lines tagging protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fine-tune a checkpoint on a dataset directory")
    train.add_argument("--data", required=True, help="directory of .conll files")
    train.add_argument("--out", required=True, help="where to save the fine-tuned model")
    train.add_argument("--checkpoint", default="bert-base-cased")
    train.add_argument("--epochs", type=int, default=2)
    train.add_argument("--lr", type=float, default=2e-5)
    train.add_argument("--max-tokens", type=int, default=512)
    train.add_argument("--batch-size", type=int, default=8)
    train.add_argument("--context", default="random",
                       choices=["none", "random", "surrounding"])
    train.add_argument("--context-k", type=int, default=2)
    train.add_argument("--seed", type=int, default=0)

    serve = sub.add_parser("serve", help="answer tagging requests on stdin/stdout")
    serve.add_argument("--model", required=True)
    serve.add_argument("--max-tokens", type=int, default=512)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        config = BridgeConfig(
            fold_model_path=args.out,
            base_checkpoint=args.checkpoint,
            epochs=args.epochs,
            learning_rate=args.lr,
            max_input_tokens=args.max_tokens,
            batch_size=args.batch_size,
            context_mode=args.context,
            context_k=args.context_k,
            seed=args.seed,
        )
        docs = read_conll_dir(args.data)
        path = finetune(docs, config)
        print(f"saved model to {path}", file=sys.stderr)
        return 0
    TaggerServer(args.model, max_input_tokens=args.max_tokens).serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
