"""Turning a config into datasets, a population and a finished run on disk."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .agent import Agent
from .config import DatasetConfig, ExperimentConfig, dump_config
from .engine import (AGENT_KEY, FORM_STREAM, NOISE_STREAM, POPULATION_KEY, WORLD_KEY,
                     FreezeLearning, SceneSet, Schedule, ScheduledEvent, SensorDefect,
                     Simulation, SwitchDataset, UnfreezeLearning, evaluate, substream)
from .metrics import MetricsTracker, SeriesWriter, aggregate_summaries, write_aggregate
from .world import (Dataset, DatasetError, PerceptionProfile, build_scenes,
                    generate_synthetic, load_dataset, read_scenes, split_entities)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "langgame-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class PreparedDataset:
    dataset: Dataset
    train: SceneSet
    tests: dict[str, SceneSet]
    manifest: dict


@dataclass
class RunResult:
    population: list[Agent]
    summary: dict
    series: list[dict] = field(default_factory=list)


def prepare_dataset(dc: DatasetConfig, seed: int, index: int, base_dir: Path | None = None
                    ) -> PreparedDataset:
    base_dir = Path(base_dir or ".")
    if dc.synthetic is not None:
        s = dc.synthetic
        dataset = generate_synthetic(s.clusters, s.channels, s.per_cluster,
                                     substream(seed, WORLD_KEY, index, 0), s.sigma,
                                     s.channel_names, dc.name)
    else:
        dataset = load_dataset(base_dir / dc.table, dc.columns, dc.exclude, dc.name)
    if dc.expect_channels is not None and len(dataset.channels) != dc.expect_channels:
        raise DatasetError(f"dataset {dc.name!r} has {len(dataset.channels)} channels, "
                           f"expected {dc.expect_channels}")
    lo, hi = dc.scene_size
    if hi > len(dataset):
        raise DatasetError(f"scene size {hi} exceeds the {len(dataset)} entities of {dc.name!r}")
    manifest = {"dataset": dc.name, "channels": list(dataset.channels), "entities": len(dataset),
                "normalization": dataset.normalization()}
    if dc.train_scene_file is not None:
        train = read_scenes(base_dir / dc.train_scene_file, len(dataset))
        tests = {k: read_scenes(base_dir / v, len(dataset)) for k, v in dc.test_scene_files.items()}
        manifest["scene_files"] = {"train": dc.train_scene_file, **dc.test_scene_files}
    else:
        try:
            train_ids, test_ids = split_entities(np.arange(len(dataset)), dc.train_fraction,
                                                 substream(seed, WORLD_KEY, index, 1))
            train = build_scenes(train_ids, dc.train_scenes, dc.scene_size,
                                 substream(seed, WORLD_KEY, index, 2))
            tests = {name: build_scenes(test_ids, dc.test_scenes, dc.scene_size,
                                        substream(seed, WORLD_KEY, index, 3, k))
                     for k, name in enumerate(dc.test_sets)}
        except ValueError as exc:
            raise DatasetError(f"dataset {dc.name!r}: {exc}") from exc
        manifest["split"] = {"seed": seed, "spawn_key": [WORLD_KEY, index, 1],
                             "train_fraction": dc.train_fraction,
                             "train_entities": len(train_ids), "test_entities": len(test_ids)}
    manifest["scenes"] = {"train": len(train), **{k: len(v) for k, v in tests.items()}}
    return PreparedDataset(dataset, SceneSet(dataset, train),
                           {k: SceneSet(dataset, v) for k, v in tests.items()}, manifest)


def build_population(config: ExperimentConfig, universe: Sequence[str], seed: int) -> list[Agent]:
    """Agents with empty inventories, their sensors and their calibration shifts."""
    pc = config.population
    rng = substream(seed, POPULATION_KEY)
    universe = sorted(universe)
    if pc.sensors.mode == "all":
        endowments = [universe] * pc.size
    elif pc.sensors.mode == "random":
        if pc.sensors.count > len(universe):
            raise ValueError(f"cannot pick {pc.sensors.count} of {len(universe)} sensors")
        draw = lambda: sorted(universe[i] for i in rng.choice(len(universe), pc.sensors.count,
                                                              replace=False))
        if pc.sensors.shared:
            shared = draw()
            endowments = [shared] * pc.size
        else:
            endowments = [draw() for _ in range(pc.size)]
    else:
        endowments = pc.sensors.explicit
    population = []
    for i, sensors in enumerate(endowments):
        shift = {}
        if config.perception.shift_std > 0:
            shift = {ch: float(v) for ch, v in
                     zip(sensors, rng.normal(0.0, config.perception.shift_std, len(sensors)))}
        profile = PerceptionProfile(shift, config.perception.noise_std)
        population.append(Agent(i, universe, sensors, profile, config.learning.params(),
                                substream(seed, AGENT_KEY, i, FORM_STREAM),
                                substream(seed, AGENT_KEY, i, NOISE_STREAM)))
    return population


def build_schedule(config: ExperimentConfig) -> Schedule:
    kinds = {
        "sensor_defect": lambda e: SensorDefect(e.lost),
        "switch_dataset": lambda e: SwitchDataset(e.dataset),
        "freeze": lambda e: FreezeLearning(),
        "unfreeze": lambda e: UnfreezeLearning(),
    }
    return Schedule(config.games, [ScheduledEvent(e.at, kinds[e.kind](e)) for e in config.schedule])


def run_experiment(config: ExperimentConfig, out_dir=None, base_dir=None) -> RunResult:
    """Run one repetition of ``config`` with ``config.seed``.

    When ``out_dir`` is given the run writes ``records.jsonl`` (if enabled),
    ``series.csv``, ``summary.json``, ``manifest.json``, ``config.yaml`` and
    ``checkpoint.json`` there.
    """
    seed = config.seed
    prepared = {dc.name: prepare_dataset(dc, seed, i, base_dir) for i, dc in enumerate(config.datasets)}
    universe = sorted({ch for p in prepared.values() for ch in p.dataset.channels})
    population = build_population(config, universe, seed)
    sim = Simulation(population, {k: p.train for k, p in prepared.items()},
                     config.datasets[0].name, seed, build_schedule(config))
    tracker = MetricsTracker(config.output.window)

    out = Path(out_dir) if out_dir is not None else None
    records_fh = series = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.yaml").write_text(dump_config(config))
        if config.output.records:
            records_fh = open(out / "records.jsonl", "w")
        series = SeriesWriter(out / "series.csv", config.output.stride)

    evaluations = sorted(enumerate(config.evaluations), key=lambda p: (p[1].after, p[0]))
    stops = sorted({e.after for _, e in evaluations} | {config.games})
    results: dict[str, dict] = {}
    try:
        for stop in stops:
            for record in sim.games(stop - sim.games_played):
                tracker.observe(record)
                if records_fh is not None:
                    records_fh.write(record.to_json() + "\n")
                if series is not None:
                    series.maybe_write(tracker)
            for idx, ev in evaluations:
                if ev.after != stop:
                    continue
                if ev.test_set not in prepared[ev.dataset].tests:
                    raise DatasetError(f"dataset {ev.dataset!r} has no test set {ev.test_set!r}")
                log.info("evaluating %s after %d games", ev.name, stop)
                results[ev.name] = evaluate(population, prepared[ev.dataset].tests[ev.test_set],
                                            ev.games, seed, config.output.window, stream=idx)
    finally:
        if records_fh is not None:
            records_fh.close()
        if series is not None:
            series.close()

    summary = {"name": config.name, "seed": seed, "games": sim.games_played,
               "train": {**{k: v for k, v in tracker.snapshot().items() if k != "game"},
                         "peak_inventory_size": tracker.peak_inventory}}
    for label, res in results.items():
        summary[label] = res["window"]
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        (out / "manifest.json").write_text(json.dumps(
            {"seed": seed, "datasets": [p.manifest for p in prepared.values()],
             "events": [[g, type(e).__name__] for g, e in sim.applied]},
            indent=2, sort_keys=True) + "\n")
        save_checkpoint(population, out / "checkpoint.json", {"name": config.name, "seed": seed,
                                                              "games": sim.games_played})
    return RunResult(population, summary, series.rows if series is not None else [])


def repetition_seeds(seed: int, repetitions: int) -> list[int]:
    if repetitions == 1:
        return [seed]
    children = np.random.SeedSequence(seed).spawn(repetitions)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def _run_one(args):
    config, out_dir, base_dir = args
    return run_experiment(config, out_dir, base_dir).summary


def run_repetitions(config: ExperimentConfig, out_dir, base_dir=None, jobs: int = 1) -> dict:
    """Run every repetition in its own directory and aggregate the summaries."""
    out = Path(out_dir)
    seeds = repetition_seeds(config.seed, config.repetitions)
    if len(seeds) == 1:
        return run_experiment(config, out, base_dir).summary
    tasks = [(config.model_copy(update={"seed": s, "repetitions": 1}), out / f"run-{r:02d}", base_dir)
             for r, s in enumerate(seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_one, tasks))
    else:
        summaries = [_run_one(t) for t in tasks]
    aggregate = aggregate_summaries(summaries)
    write_aggregate(aggregate, out)
    return aggregate


def save_checkpoint(population: Sequence[Agent], path, meta: dict | None = None) -> None:
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "meta": meta or {},
           "agents": [a.to_dict() for a in population]}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_checkpoint(path) -> list[Agent]:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {doc.get('version')!r}, "
                              f"this build reads version {CHECKPOINT_VERSION}")
    try:
        return [Agent.from_dict(a) for a in doc["agents"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc!r})") from exc
