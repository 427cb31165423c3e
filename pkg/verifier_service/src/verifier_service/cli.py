"""Command-line entry point.

    verifier-service train --data train.jsonl --alpha-grid 0,0.1,0.2,0.3 --out model_dir
    verifier-service serve --model model_dir --port 8100
"""

from __future__ import annotations

import argparse

from .data import load_training_file
from .model import ModelConfig, load_model
from .training import TrainerConfig, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verifier-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a scorer on a training-set JSONL")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--alpha", type=float, default=0.1)
    p_train.add_argument("--alpha-grid", default=None,
                         help="comma-separated, e.g. 0,0.1,0.2,0.3")
    p_train.add_argument("--learning-rate", type=float, default=1e-5)
    p_train.add_argument("--batch-size", type=int, default=128)
    p_train.add_argument("--epochs", type=int, default=3)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--dim", type=int, default=128)
    p_train.add_argument("--layers", type=int, default=2)
    p_train.add_argument("--max-len", type=int, default=512)

    p_serve = sub.add_parser("serve", help="serve /score and /health")
    p_serve.add_argument("--model", required=True)
    p_serve.add_argument("--port", type=int, default=8100)
    p_serve.add_argument("--host", default="127.0.0.1")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        grid = (
            [float(tok) for tok in args.alpha_grid.split(",") if tok.strip()]
            if args.alpha_grid
            else None
        )
        config = TrainerConfig(
            alpha=args.alpha,
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            epochs=args.epochs,
            alpha_grid=grid,
            seed=args.seed,
        )
        model_config = ModelConfig(dim=args.dim, n_layers=args.layers, max_len=args.max_len)
        examples = load_training_file(args.data)
        _, metrics = train(examples, config, model_config, out_dir=args.out)
        print(f"trained alpha={metrics['alpha']} -> {args.out}")
        return 0

    if args.command == "serve":
        import uvicorn

        from .server import create_app

        app = create_app(load_model(args.model))
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
