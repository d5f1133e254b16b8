"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from kpa_scorer.errors import ConfigError, DataError
from kpa_scorer.models import load_model, save_model
from kpa_scorer.service import create_app
from kpa_scorer.train import TrainConfig, fine_tune, load_pairs_csv

PROG = "kpa-scorer"


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    app = create_app(load_model(args.model))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _read_train_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        values = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {p}: {exc}") from None
    allowed = {"base_model", "epochs", "learning_rate", "seed", "train", "dev", "out"}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("base_model", "train", "out"):
        if key not in values:
            raise ConfigError(f"config is missing {key!r}")
    return values


def _cmd_train(args: argparse.Namespace) -> int:
    values = _read_train_config(args.config)
    cfg = TrainConfig(
        base_model=values["base_model"],
        epochs=values.get("epochs", 3),
        learning_rate=values.get("learning_rate"),
        seed=values.get("seed", 0),
    )
    train_pairs = load_pairs_csv(values["train"])
    dev_pairs = load_pairs_csv(values["dev"]) if "dev" in values else ()
    model, history = fine_tune(cfg, train_pairs, dev_pairs)
    save_model(model, values["out"])
    summary = {
        "base_model": cfg.base_model,
        "learning_rate": cfg.resolved_lr,
        "epochs": cfg.epochs,
        "train_pairs": len(train_pairs),
        "dev_pairs": len(dev_pairs),
        "initial_loss": history[0],
        "final_loss": history[-1],
        "model": str(values["out"]),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Scoring sidecar for key point analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="serve match and quality scores over HTTP")
    serve.add_argument("--model", required=True, help="model file (JSON)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8500)
    serve.set_defaults(func=_cmd_serve)

    train = sub.add_parser("train", help="fine-tune a match model on labeled pairs")
    train.add_argument("--config", required=True, help="TOML training config")
    train.set_defaults(func=_cmd_train)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
