"""Command-line interface.

Subcommands: `synth` (dataset generation), `train`, `eval`, `ablate`,
and `bench`.  Configs are JSON files; numeric artifacts use the feature
container format.  Exit code 0 on success; failures print one
machine-readable JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import render_benchmark, run_benchmark
from .data.dataset import Dataset
from .data.storage import read_json, write_json
from .data.synthetic import SynthConfig, generate
from .engine import (
    TrainConfig,
    evaluate,
    load_checkpoint,
    render_table,
    run_grid,
    save_checkpoint,
    train,
)


def _cmd_synth(args) -> int:
    cfg = SynthConfig.from_dict(read_json(args.config))
    ds = generate(cfg, args.out)
    print(f"wrote dataset to {args.out}")
    for name, samples in sorted(ds.splits.items()):
        print(f"  {name}: {len(samples)} samples")
    ceilings = ds.meta.get("bayes_top1", {})
    if ceilings:
        pretty = ", ".join(f"{k}={v:.4f}" for k, v in sorted(ceilings.items()))
        print(f"  oracle top-1 ceiling: {pretty}")
    return 0


def _cmd_train(args) -> int:
    cfg = TrainConfig.from_dict(read_json(args.config))
    if args.dataset:
        cfg.dataset = args.dataset
    if cfg.dataset is None:
        raise ValueError("no dataset path in config and no --dataset given")
    result = train(cfg)
    save_checkpoint(args.out, result)
    print(
        f"wrote checkpoint to {args.out} "
        f"(best epoch {result.best_epoch}, val top5@1s "
        f"{result.best_val_top5:.4f})"
    )
    return 0


def _cmd_eval(args) -> int:
    model, cfg, _ = load_checkpoint(args.checkpoint)
    dataset_path = args.dataset or cfg.dataset
    if dataset_path is None:
        raise ValueError("no dataset path in checkpoint config and no --dataset")
    dataset = Dataset.load(dataset_path)
    report = evaluate(model, dataset, split=args.split)
    payload = report.to_dict()
    if args.out:
        write_json(args.out, payload)
        print(f"wrote report to {args.out}")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_ablate(args) -> int:
    spec = read_json(args.config)
    base = spec.get("base", {})
    cells = spec.get("cells", [])
    if not cells:
        raise ValueError("ablation config needs a non-empty 'cells' list")
    result = run_grid(base, cells)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "table.json", result)
    table = render_table(result)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def _cmd_bench(args) -> int:
    result = run_benchmark(repeats=args.repeats)
    print(render_benchmark(result))
    if args.out:
        write_json(args.out, result)
        print(f"wrote timings to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anticipation",
        description="Train and evaluate fused visual-semantic anticipation models.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--config", required=True, help="SynthConfig JSON path")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train a model, keep the best epoch")
    p.add_argument("--config", required=True, help="TrainConfig JSON path")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--dataset", help="override the config's dataset path")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over all horizons")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", help="dataset directory (defaults to config)")
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ablate", help="train a grid of configurations")
    p.add_argument("--config", required=True, help="grid JSON: base + cells")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--out", help="timings JSON path")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except Exception as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
