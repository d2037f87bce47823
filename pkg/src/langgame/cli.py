"""Command-line entry point: ``langgame run|evaluate|scenes|aggregate|presets``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import (PRESET_NAMES, ConfigError, dump_config, load_config, parse_config,
                     parse_sweep_arg, preset, sweep)
from .engine import SceneSet, evaluate, substream
from .experiment import CheckpointError, load_checkpoint, run_repetitions
from .metrics import aggregate_summaries, load_summary, write_aggregate
from .world import (DatasetError, build_scenes, load_dataset, read_scenes, split_entities,
                    write_manifest, write_scenes)

log = logging.getLogger("langgame")


def cmd_run(args) -> int:
    config = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.repetitions is not None:
        updates["repetitions"] = args.repetitions
    if args.games is not None:
        updates["games"] = args.games
    if updates:
        config = parse_config({**config.model_dump(mode="json"), **updates})
    base_dir = Path(args.data_dir) if args.data_dir else None
    result = run_repetitions(config, args.out, base_dir, args.jobs)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    population = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.table, args.columns, args.exclude or ())
    scenes = read_scenes(args.scenes, len(dataset))
    records = None
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        records = open(out / "eval_records.jsonl", "w")
    try:
        result = evaluate(population, SceneSet(dataset, scenes), args.games, args.seed,
                          on_record=(lambda r: records.write(r.to_json() + "\n")) if records else None)
    finally:
        if records is not None:
            records.close()
    text = json.dumps(result, indent=2, sort_keys=True)
    if out is not None:
        (out / "evaluation.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_scenes(args) -> int:
    dataset = load_dataset(args.table, args.columns, args.exclude or ())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ids, test_ids = split_entities(np.arange(len(dataset)), args.train_fraction,
                                         substream(args.seed, 0))
    size = (args.min_size, args.max_size)
    train = build_scenes(train_ids, args.train_scenes, size, substream(args.seed, 1))
    test = build_scenes(test_ids, args.test_scenes, size, substream(args.seed, 2))
    write_scenes(out / "train_scenes.txt", train)
    write_scenes(out / "test_scenes.txt", test)
    write_manifest(out / "manifest.json", {
        "table": str(args.table), "channels": list(dataset.channels), "entities": len(dataset),
        "normalization": dataset.normalization(), "split_seed": args.seed,
        "train_fraction": args.train_fraction, "train_entities": len(train_ids),
        "test_entities": len(test_ids), "train_scenes": len(train), "test_scenes": len(test),
        "scene_size": list(size)})
    print(f"wrote {len(train)} train and {len(test)} test scenes to {out}")
    return 0


def cmd_aggregate(args) -> int:
    summaries = [load_summary(p) for p in args.summaries]
    result = aggregate_summaries(summaries)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_aggregate(result, out)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_presets(args) -> int:
    if args.list or not args.name:
        print("\n".join(PRESET_NAMES))
        return 0
    config = preset(args.name)
    configs = [(args.name, config)]
    if args.sweep:
        grid = dict(parse_sweep_arg(s) for s in args.sweep)
        configs = [(f"{args.name}_{suffix}", c) for suffix, c in sweep(config, grid)]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for stem, c in configs:
            (out / f"{stem}.yaml").write_text(dump_config(c))
        print(f"wrote {len(configs)} config(s) to {out}")
    else:
        for _, c in configs:
            sys.stdout.write("---\n" + dump_config(c))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langgame", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--games", type=int, help="override the game count")
    p.add_argument("--jobs", type=int, default=1, help="repetitions run in parallel")
    p.add_argument("--data-dir", help="base directory for relative dataset paths")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="frozen evaluation of a checkpoint on a scene file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--exclude", nargs="+")
    p.add_argument("--games", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scenes", help="split a feature table and write scene files")
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--exclude", nargs="+")
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--train-scenes", type=int, default=20000)
    p.add_argument("--test-scenes", type=int, default=1000)
    p.add_argument("--min-size", type=int, default=3)
    p.add_argument("--max-size", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_scenes)

    p = sub.add_parser("aggregate", help="mean and 2 std of several run summaries")
    p.add_argument("summaries", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("presets", help="list or emit ready-made configs")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true")
    p.add_argument("--out")
    p.add_argument("--sweep", action="append", metavar="KEY=V1,V2",
                   help="emit one config per combination, e.g. learning.s_reward=0.01,0.1")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
