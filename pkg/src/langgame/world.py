"""Datasets, scenes and how agents perceive them."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    pass


class ImperceptibleEntity(ValueError):
    """The agent has no sensor for any channel the entity carries."""


@dataclass(frozen=True)
class Entity:
    id: int
    features: dict[str, float]


@dataclass(frozen=True)
class Scene:
    id: int
    entity_ids: tuple[int, ...]


@dataclass
class Dataset:
    """A normalised feature table. Rows are entities, columns are channels.

    Indexing yields :class:`Entity` objects; the engine works on ``values``
    directly.
    """

    name: str
    channels: tuple[str, ...]
    values: np.ndarray
    minima: np.ndarray | None = None
    maxima: np.ndarray | None = None
    labels: np.ndarray | None = None  # synthetic cluster ids, diagnostics only
    _column_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> Entity:
        return Entity(int(i), dict(zip(self.channels, map(float, self.values[i]))))

    def columns_for(self, channels: tuple[str, ...]) -> np.ndarray:
        """Column index of each channel in ``channels``, -1 where the dataset lacks it."""
        cols = self._column_cache.get(channels)
        if cols is None:
            lookup = {ch: j for j, ch in enumerate(self.channels)}
            cols = np.array([lookup.get(ch, -1) for ch in channels], dtype=int)
            self._column_cache[channels] = cols
        return cols

    def normalization(self) -> dict:
        if self.minima is None:
            return {}
        return {ch: {"min": float(lo), "max": float(hi)}
                for ch, lo, hi in zip(self.channels, self.minima, self.maxima)}


def minmax_normalize(raw: np.ndarray):
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    # constant columns collapse to 0
    values = np.where(span > 0, (raw - lo) / safe, 0.0)
    return values, lo, hi


def _sniff_delimiter(header: str) -> str:
    counts = {d: header.count(d) for d in (",", ";", "\t")}
    best = max(counts, key=counts.get)
    return best if counts[best] else ","


def load_dataset(path, columns: Sequence[str] | None = None, exclude: Sequence[str] = (),
                 name: str | None = None) -> Dataset:
    """Read a delimited feature table with a header row and min-max normalise every channel.

    ``columns`` selects the feature columns (default: every column not in
    ``exclude``). Quoted headers, as in the UCI wine files, are accepted.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetError(f"cannot read feature table {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetError(f"{path}: empty file")
    reader = csv.reader(lines, delimiter=_sniff_delimiter(lines[0]))
    header = [h.strip() for h in next(reader)]
    if columns is None:
        missing = [c for c in exclude if c not in header]
        selected = [h for h in header if h not in set(exclude)]
    else:
        missing = [c for c in columns if c not in header]
        selected = list(columns)
    if missing:
        raise DatasetError(f"{path}: missing column(s) {missing}; header has {header}")
    if not selected:
        raise DatasetError(f"{path}: no feature columns selected")
    idx = [header.index(c) for c in selected]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        out = []
        for j in idx:
            try:
                v = float(row[j])
            except ValueError:
                raise DatasetError(
                    f"{path}:{lineno}: non-numeric value {row[j]!r} in column {header[j]!r}") from None
            if not math.isfinite(v):
                raise DatasetError(f"{path}:{lineno}: non-finite value in column {header[j]!r}")
            out.append(v)
        rows.append(out)
    if not rows:
        raise DatasetError(f"{path}: header only, no entities")
    values, lo, hi = minmax_normalize(np.array(rows, dtype=float))
    return Dataset(name or path.stem, tuple(selected), values, lo, hi)


def generate_synthetic(num_clusters: int, num_channels: int, entities_per_cluster: int,
                       rng: np.random.Generator, sigma: float = 0.03,
                       channel_names: Sequence[str] | None = None,
                       name: str = "synthetic") -> Dataset:
    """Gaussian blobs with centres in [0.1, 0.9], clipped to the unit cube."""
    if min(num_clusters, num_channels, entities_per_cluster) < 1:
        raise ValueError("cluster, channel and entity counts must all be >= 1")
    if channel_names is None:
        channel_names = [f"c{j + 1}" for j in range(num_channels)]
    if len(channel_names) != num_channels:
        raise ValueError("channel_names length must equal num_channels")
    centres = rng.uniform(0.1, 0.9, size=(num_clusters, num_channels))
    labels = np.repeat(np.arange(num_clusters), entities_per_cluster)
    noise = rng.normal(0.0, 1.0, size=(len(labels), num_channels)) * sigma
    values = np.clip(centres[labels] + noise, 0.0, 1.0)
    return Dataset(name, tuple(channel_names), values, labels=labels)


def split_entities(entity_ids, train_fraction: float, rng: np.random.Generator):
    """Disjoint random train/test partition; both sides get at least one entity."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    ids = np.asarray(entity_ids, dtype=int)
    if len(ids) < 2:
        raise ValueError("need at least two entities to split")
    n_train = min(max(int(round(train_fraction * len(ids))), 1), len(ids) - 1)
    perm = rng.permutation(ids)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def build_scenes(entity_ids, num_scenes: int, size_range: tuple[int, int],
                 rng: np.random.Generator, max_attempts_factor: int = 100) -> list[Scene]:
    """Sample ``num_scenes`` distinct entity sets with sizes uniform in ``size_range``."""
    ids = np.asarray(entity_ids, dtype=int)
    lo, hi = size_range
    if lo < 2 or hi < lo:
        raise ValueError(f"invalid scene size range {size_range}")
    if len(ids) < hi:
        raise ValueError(f"{len(ids)} entities cannot fill scenes of size {hi}")
    seen: set[frozenset] = set()
    scenes: list[Scene] = []
    attempts = 0
    while len(scenes) < num_scenes:
        attempts += 1
        if attempts > max_attempts_factor * max(num_scenes, 1):
            raise ValueError(f"could only build {len(scenes)} distinct scenes of {num_scenes}")
        size = int(rng.integers(lo, hi + 1))
        members = ids[rng.choice(len(ids), size=size, replace=False)]
        key = frozenset(members.tolist())
        if key in seen:
            continue
        seen.add(key)
        scenes.append(Scene(len(scenes), tuple(int(m) for m in members)))
    return scenes


def write_scenes(path, scenes: Sequence[Scene]) -> None:
    with open(path, "w") as fh:
        for scene in scenes:
            fh.write(",".join(map(str, scene.entity_ids)) + "\n")


def read_scenes(path, num_entities: int | None = None) -> list[Scene]:
    scenes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                ids = tuple(int(tok) for tok in line.split(","))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: scene ids must be integers") from None
            if len(set(ids)) != len(ids):
                raise DatasetError(f"{path}:{lineno}: duplicate entity in scene")
            if len(ids) < 2:
                raise DatasetError(f"{path}:{lineno}: a scene needs at least two entities")
            if num_entities is not None and (min(ids) < 0 or max(ids) >= num_entities):
                raise DatasetError(f"{path}:{lineno}: entity id out of range")
            scenes.append(Scene(len(scenes), ids))
    if not scenes:
        raise DatasetError(f"{path}: no scenes")
    return scenes


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


@dataclass
class PerceptionProfile:
    shift: dict[str, float] = field(default_factory=dict)
    noise_std: float = 0.0


@dataclass
class ScenePerception:
    """One agent's view of a scene: values and availability over the agent's channels."""

    values: np.ndarray  # (n, L)
    mask: np.ndarray  # (n, L) bool

    def __len__(self) -> int:
        return len(self.values)

    def vector(self, i: int, channels: Sequence[str]) -> dict[str, float]:
        return {ch: float(v) for ch, v, m in zip(channels, self.values[i], self.mask[i]) if m}


def perceive_scene(agent, dataset: Dataset, entity_ids: Sequence[int],
                   rng: np.random.Generator | None = None) -> ScenePerception:
    """Project entities onto the agent's sensors, then add its shift and fresh noise.

    Values are left unclamped. Noise is drawn only when the profile asks for it.
    """
    cols = dataset.columns_for(agent.channels)
    avail = (cols >= 0) & agent.sensor_mask
    rows = np.asarray(entity_ids, dtype=int)
    X = np.zeros((len(rows), len(agent.channels)))
    if not avail.any():
        raise ImperceptibleEntity(f"agent {agent.id} has no sensor for dataset {dataset.name!r}")
    X[:, avail] = dataset.values[rows][:, cols[avail]]
    X[:, avail] += agent.shift_array[avail]
    noise_std = agent.profile.noise_std
    if noise_std > 0:
        X[:, avail] += (rng if rng is not None else agent.noise_rng).normal(
            0.0, noise_std, size=(len(rows), int(avail.sum())))
    mask = np.repeat(avail[None, :], len(rows), axis=0)
    return ScenePerception(X, mask)


def perceive(agent, entity: Entity, rng: np.random.Generator | None = None) -> dict[str, float]:
    """Perceived vector for a single entity, keyed by channel."""
    out = {}
    noise_std = agent.profile.noise_std
    gen = rng if rng is not None else agent.noise_rng
    for ch, sensor in zip(agent.channels, agent.sensor_mask):
        if sensor and ch in entity.features:
            value = entity.features[ch] + agent.profile.shift.get(ch, 0.0)
            if noise_std > 0:
                value += float(gen.normal(0.0, noise_std))
            out[ch] = value
    if not out:
        raise ImperceptibleEntity(f"agent {agent.id} cannot perceive entity {entity.id}")
    return out
