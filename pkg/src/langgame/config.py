"""Experiment configuration: schema, YAML I/O, presets and sweeps.

Configs are YAML documents validated against :class:`ExperimentConfig`.
Unknown keys are rejected. Every learning parameter defaults to the standard
value, so a minimal config only names datasets and a game count.
"""
from __future__ import annotations

import copy
import itertools
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .agent import LearningParams


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LearningConfig(Strict):
    s_init: float = 0.5
    s_reward: float = 0.1
    s_punish: float = -0.1
    s_inhibit: float = -0.02
    sigma_init: float = Field(0.01, gt=0)
    weight_logit_init: float = 0.0
    sigmoid_slope: float = Field(0.5, gt=0)
    c_reward: float = 1.0
    c_punish: float = -5.0
    max_subset_channels: Optional[int] = Field(None, ge=1)

    def params(self) -> LearningParams:
        return LearningParams(**self.model_dump())


class SyntheticSpec(Strict):
    clusters: int = Field(8, ge=1)
    channels: int = Field(5, ge=1)
    per_cluster: int = Field(100, ge=1)
    sigma: float = Field(0.03, ge=0)
    channel_names: Optional[list[str]] = None


class DatasetConfig(Strict):
    name: str
    table: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    columns: Optional[list[str]] = None
    exclude: list[str] = []
    expect_channels: Optional[int] = Field(None, ge=1)
    train_fraction: float = Field(0.9, gt=0, lt=1)
    train_scenes: int = Field(20000, ge=1)
    test_scenes: int = Field(1000, ge=1)
    scene_size: tuple[int, int] = (3, 10)
    train_scene_file: Optional[str] = None
    test_scene_files: dict[str, str] = {}
    # names of the test scene lists built from the held-out entities when no files are given
    test_sets: list[str] = ["test"]

    @model_validator(mode="after")
    def _source(self):
        if (self.table is None) == (self.synthetic is None):
            raise ValueError("exactly one of 'table' or 'synthetic' must be given")
        lo, hi = self.scene_size
        if lo < 2 or hi < lo:
            raise ValueError(f"scene_size {self.scene_size} must satisfy 2 <= min <= max")
        return self


class SensorsConfig(Strict):
    mode: Literal["all", "random", "explicit"] = "all"
    count: Optional[int] = Field(None, ge=1)
    shared: bool = False  # random mode: one draw shared by the whole population
    explicit: Optional[list[list[str]]] = None

    @model_validator(mode="after")
    def _mode(self):
        if self.mode == "random" and self.count is None:
            raise ValueError("random sensor mode needs 'count'")
        if self.mode == "explicit" and not self.explicit:
            raise ValueError("explicit sensor mode needs 'explicit' lists")
        return self


class PopulationConfig(Strict):
    size: int = Field(10, ge=2)
    sensors: SensorsConfig = SensorsConfig()


class PerceptionConfig(Strict):
    shift_std: float = Field(0.0, ge=0)
    noise_std: float = Field(0.0, ge=0)


class EventConfig(Strict):
    at: int = Field(ge=1)
    kind: Literal["sensor_defect", "switch_dataset", "freeze", "unfreeze"]
    lost: Optional[int] = Field(None, ge=1)
    dataset: Optional[str] = None

    @model_validator(mode="after")
    def _payload(self):
        if self.kind == "sensor_defect" and self.lost is None:
            raise ValueError("sensor_defect needs 'lost'")
        if self.kind == "switch_dataset" and self.dataset is None:
            raise ValueError("switch_dataset needs 'dataset'")
        return self


class EvaluationConfig(Strict):
    after: int = Field(ge=0)
    dataset: str
    test_set: str = "test"
    games: int = Field(100000, ge=1)
    label: Optional[str] = None

    @property
    def name(self) -> str:
        return self.label or f"{self.dataset}-{self.test_set}@{self.after}"


class OutputConfig(Strict):
    records: bool = True
    stride: int = Field(1000, ge=1)
    window: int = Field(1000, ge=1)


class ExperimentConfig(Strict):
    name: str = "experiment"
    seed: int = Field(0, ge=0)
    games: int = Field(ge=0)
    repetitions: int = Field(1, ge=1)
    datasets: list[DatasetConfig] = Field(min_length=1)
    population: PopulationConfig = PopulationConfig()
    perception: PerceptionConfig = PerceptionConfig()
    learning: LearningConfig = LearningConfig()
    schedule: list[EventConfig] = []
    evaluations: list[EvaluationConfig] = []
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _cross(self):
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError("dataset names must be unique")
        last = 0
        for ev in self.schedule:
            if ev.at > self.games:
                raise ValueError(f"event at {ev.at} is after the last game ({self.games})")
            if ev.at <= last:
                raise ValueError("schedule indices must be strictly increasing")
            last = ev.at
            if ev.dataset is not None and ev.dataset not in names:
                raise ValueError(f"schedule refers to unknown dataset {ev.dataset!r}")
        for ev in self.evaluations:
            if ev.dataset not in names:
                raise ValueError(f"evaluation refers to unknown dataset {ev.dataset!r}")
            if ev.after > self.games:
                raise ValueError(f"evaluation after game {ev.after} is beyond {self.games}")
        sensors = self.population.sensors
        if sensors.mode == "explicit" and len(sensors.explicit) != self.population.size:
            raise ValueError("explicit sensors need one list per agent")
        return self

    def dataset(self, name: str) -> DatasetConfig:
        return next(d for d in self.datasets if d.name == name)


class ConfigError(ValueError):
    pass


def parse_config(doc: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        lines = [f"  {'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config:\n" + "\n".join(lines)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return parse_config(doc)


def dump_config(config: ExperimentConfig) -> str:
    doc = config.model_dump(mode="json", exclude_defaults=False)
    return yaml.safe_dump(doc, sort_keys=False)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

CLEVR = dict(name="clevr", table="data/clevr/features.csv", expect_channels=20,
             train_scene_file="data/clevr/train_scenes.txt",
             test_scene_files={"test": "data/clevr/test_scenes.txt"})
WINE = dict(name="wine", table="data/winequality-white.csv", exclude=["quality"],
            expect_channels=11, train_fraction=0.9, train_scenes=20000, test_scenes=1000)
CREDIT = dict(name="credit", table="data/creditcard.csv",
              columns=[f"V{i}" for i in range(1, 29)], expect_channels=28,
              train_fraction=0.9, train_scenes=40000, test_scenes=4000)
COGENT = dict(name="cogent", table="data/cogent/features.csv", expect_channels=20,
              train_scene_file="data/cogent/train_scenes.txt",
              test_scene_files={"A": "data/cogent/test_a_scenes.txt",
                                "B": "data/cogent/test_b_scenes.txt"})

MILLION = 1_000_000


def _base(name, dataset, games=MILLION, **extra):
    doc = {"name": name, "seed": 0, "games": games, "repetitions": 10,
           "datasets": [copy.deepcopy(dataset)],
           "evaluations": [{"after": games, "dataset": dataset["name"], "games": 100000}]}
    doc.update(extra)
    return doc


def _clevr(name, **extra):
    return _base(name, CLEVR, **extra)


def _presets() -> dict[str, dict]:
    p = {
        "baseline-clevr": _clevr("baseline-clevr"),
        "baseline-wine": _base("baseline-wine", WINE),
        "baseline-credit": _base("baseline-credit", CREDIT),
        "cogent": _base("cogent", COGENT, evaluations=[
            {"after": MILLION, "dataset": "cogent", "test_set": "A", "games": 100000},
            {"after": MILLION, "dataset": "cogent", "test_set": "B", "games": 100000}]),
        "hetero-19": _clevr("hetero-19", population={"size": 10, "sensors": {"mode": "random", "count": 19}}),
        "hetero-10": _clevr("hetero-10", population={"size": 10, "sensors": {"mode": "random", "count": 10}}),
        "homo-19": _clevr("homo-19", population={
            "size": 10, "sensors": {"mode": "random", "count": 19, "shared": True}}),
        "homo-10": _clevr("homo-10", population={
            "size": 10, "sensors": {"mode": "random", "count": 10, "shared": True}}),
        "defect-1": _clevr("defect-1", schedule=[{"at": 500000, "kind": "sensor_defect", "lost": 1}]),
        "defect-10": _clevr("defect-10", schedule=[{"at": 500000, "kind": "sensor_defect", "lost": 10}]),
        "shift-0.1": _clevr("shift-0.1", perception={"shift_std": 0.1}),
        "shift-1": _clevr("shift-1", perception={"shift_std": 1.0}),
        "noise-0.1": _clevr("noise-0.1", perception={"noise_std": 0.1}),
        "noise-1": _clevr("noise-1", perception={"noise_std": 1.0}),
        "continual": {
            "name": "continual", "seed": 0, "games": 2 * MILLION, "repetitions": 10,
            "datasets": [copy.deepcopy(CLEVR), copy.deepcopy(WINE)],
            "schedule": [{"at": MILLION, "kind": "switch_dataset", "dataset": "wine"}],
            "evaluations": [
                {"after": MILLION, "dataset": "clevr", "games": 100000, "label": "clevr"},
                {"after": 2 * MILLION, "dataset": "wine", "games": 100000, "label": "clevr-wine"},
                {"after": 2 * MILLION, "dataset": "clevr", "games": 100000, "label": "clevr-cont"},
            ],
        },
    }
    return p


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> ExperimentConfig:
    presets = _presets()
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(presets)}")
    return parse_config(presets[name])


def preset_doc(name: str) -> dict:
    return preset(name).model_dump(mode="json")


def desk_scale(config: ExperimentConfig, games: int, *, per_cluster: int = 100,
               train_scenes: int = 2000, test_scenes: int = 200, eval_games: int = 1000,
               default_channels: int = 5) -> ExperimentConfig:
    """Shrink a config to synthetic data and ``games`` games, keeping its structure.

    Each dataset becomes an 8-cluster synthetic set with the same channel count
    (channels are prefixed with the dataset name, so datasets stay disjoint).
    Schedule and evaluation indices are rescaled proportionally.
    """
    doc = config.model_dump(mode="json")
    scale = games / config.games if config.games else 0.0
    rescale = lambda at: max(1, min(games, int(round(at * scale))))
    for d in doc["datasets"]:
        n = d["expect_channels"] or default_channels
        d.update(table=None, columns=None, exclude=[], train_scene_file=None,
                 train_scenes=train_scenes, test_scenes=test_scenes,
                 test_sets=sorted(d["test_scene_files"]) or d["test_sets"], test_scene_files={},
                 synthetic={"clusters": 8, "channels": n, "per_cluster": per_cluster, "sigma": 0.03,
                            "channel_names": [f"{d['name']}-{j + 1}" for j in range(n)]})
    doc["games"] = games
    doc["repetitions"] = 1
    last = 0
    for ev in doc["schedule"]:
        ev["at"] = max(rescale(ev["at"]), last + 1)
        last = ev["at"]
    for ev in doc["evaluations"]:
        ev["after"] = rescale(ev["after"]) if ev["after"] else 0
        ev["games"] = eval_games
    return parse_config(doc)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _set_path(doc: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def sweep(base: ExperimentConfig, grid: dict[str, list]) -> list[tuple[str, ExperimentConfig]]:
    """Cartesian product of ``grid`` (dotted key -> values) applied to ``base``.

    Returns ``(suffix, config)`` pairs; every generated config is validated.
    """
    keys = list(grid)
    out = []
    for values in itertools.product(*(grid[k] for k in keys)):
        doc = base.model_dump(mode="json")
        parts = []
        for key, value in zip(keys, values):
            _set_path(doc, key, value)
            parts.append(f"{key.split('.')[-1]}={value}")
        doc["name"] = f"{base.name}-" + "-".join(parts)
        out.append(("_".join(parts), parse_config(doc)))
    return out


def parse_sweep_arg(arg: str) -> tuple[str, list]:
    """``learning.s_reward=0.01,0.05,0.1`` -> ("learning.s_reward", [0.01, 0.05, 0.1])."""
    if "=" not in arg:
        raise ConfigError(f"sweep spec {arg!r} must look like key=v1,v2")
    key, raw = arg.split("=", 1)
    return key.strip(), [yaml.safe_load(v) for v in raw.split(",")]
