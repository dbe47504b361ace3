"""Command line for training and exporting scorer networks."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .data import load_shards, read_request_log, read_score_file
from .export import export_scores
from .nets import default_spec
from .train import (
    distill,
    load_checkpoint,
    save_checkpoint,
    train_binary,
    train_split,
    write_curve_csv,
)


def cmd_train(args) -> int:
    features, targets = load_shards(args.shards, args.kind)
    spec = default_spec(args.kind, shrink=args.shrink)
    common = dict(
        spec=spec, epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
        seed=args.seed,
    )
    if args.kind == "split":
        result = train_split(features, targets, match_url=args.match_url, **common)
    else:
        result = train_binary(args.kind, features, targets, **common)
    save_checkpoint(result, args.out)
    if args.curve:
        write_curve_csv(result.history, args.curve)
    last = result.history[-1]
    print(
        f"{args.kind}: {len(result.history)} epochs, loss {last['loss']:.4f}, "
        f"accuracy {last['accuracy']:.4f} -> {args.out}"
    )
    return 0


def cmd_distill(args) -> int:
    log = read_request_log(args.request_log)
    scores = read_score_file(args.scores)
    result = distill(
        args.kind, log, scores, max_epochs=args.max_epochs, lr=args.lr,
        batch_size=args.batch_size, seed=args.seed,
        target_accuracy=args.target_accuracy, shrink=args.shrink,
    )
    save_checkpoint(result, args.out)
    if args.curve:
        write_curve_csv(result.history, args.curve)
    last = result.history[-1]
    print(
        f"{args.kind}: distilled to accuracy {last['accuracy']:.4f} "
        f"in {len(result.history)} epochs -> {args.out}"
    )
    return 0


def cmd_export(args) -> int:
    model, spec = load_checkpoint(args.ckpt)
    if spec.kind != args.kind:
        print(f"checkpoint holds a {spec.kind} net, not {args.kind}", file=sys.stderr)
        return 2
    entries = read_request_log(args.request_log)
    count = export_scores(model, spec, entries, args.out)
    print(f"{args.kind}: exported {count} records -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shred-train", description=__doc__)
    parser.add_argument("--version", action="version", version=f"shred-train {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a scorer on example shards")
    p.add_argument("--kind", choices=("split", "fix", "merge"), required=True)
    p.add_argument("--shards", required=True, help="directory with shard files + manifest")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=None, help="default: 1e-3/1e-4/1e-4 per kind")
    p.add_argument("--batch-size", type=int, default=None, help="default: 64/64/128 per kind")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shrink", type=int, default=4, help="width divisor for desk runs")
    p.add_argument("--curve", default=None, help="training-curve CSV path")
    p.add_argument("--match-url", default=None,
                   help="decomposition service URL for over-segmentation target matching")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("distill", help="memorize recorded responses for recorded requests")
    p.add_argument("--kind", choices=("split", "fix", "merge"), required=True)
    p.add_argument("--request-log", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shrink", type=int, default=4)
    p.add_argument("--target-accuracy", type=float, default=1.0)
    p.add_argument("--curve", default=None)
    p.set_defaults(fn=cmd_distill)

    p = sub.add_parser("export", help="score a request log into a replayable file")
    p.add_argument("--kind", choices=("split", "fix", "merge"), required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--request-log", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
