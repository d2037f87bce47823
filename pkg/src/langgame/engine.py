"""Playing games: one interaction, scheduled runs, and frozen evaluation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .agent import Agent, align_failure_unknown_word, align_failure_wrong_pointing
from .metrics import MetricsTracker
from .world import Dataset, Scene, perceive_scene

RECORD_SCHEMA_VERSION = 1

# spawn keys for the master seed; per-agent streams use (AGENT_KEY, agent_id, purpose)
WORLD_KEY, SCENE_KEY, PAIR_KEY, TOPIC_KEY, POPULATION_KEY, AGENT_KEY, EVAL_KEY = range(7)
FORM_STREAM, NOISE_STREAM = 0, 1


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class GameRecord:
    game_index: int
    speaker_id: int
    listener_id: int
    scene_id: int
    topic_index: int
    utterance: str | None
    listener_pointing: int | None
    success: bool
    invented: bool
    adopted: bool
    coherent: bool | None = None

    def to_json(self) -> str:
        return json.dumps({"v": RECORD_SCHEMA_VERSION, **asdict(self)}, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "GameRecord":
        doc = json.loads(line)
        version = doc.pop("v", None)
        if version != RECORD_SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema version {version!r}")
        return cls(**doc)


@dataclass(frozen=True)
class SensorDefect:
    lost_per_agent: int


@dataclass(frozen=True)
class SwitchDataset:
    dataset: str


@dataclass(frozen=True)
class FreezeLearning:
    pass


@dataclass(frozen=True)
class UnfreezeLearning:
    pass


@dataclass(frozen=True)
class ScheduledEvent:
    at: int  # fires once game ``at`` has been played
    event: object


@dataclass
class Schedule:
    total_games: int
    events: list[ScheduledEvent] = field(default_factory=list)

    def __post_init__(self):
        last = 0
        for ev in self.events:
            if not 1 <= ev.at <= self.total_games:
                raise ValueError(f"event at game {ev.at} outside [1, {self.total_games}]")
            if ev.at <= last:
                raise ValueError("event indices must be strictly increasing")
            last = ev.at


@dataclass
class SceneSet:
    dataset: Dataset
    scenes: Sequence[Scene]

    def __post_init__(self):
        if not self.scenes:
            raise ValueError("a scene set needs at least one scene")


@dataclass
class GameStreams:
    scene: np.random.Generator
    pair: np.random.Generator
    topic: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int, *prefix: int) -> "GameStreams":
        return cls(substream(seed, *prefix, SCENE_KEY), substream(seed, *prefix, PAIR_KEY),
                   substream(seed, *prefix, TOPIC_KEY))


def play_game(population: Sequence[Agent], world: SceneSet, streams: GameStreams,
              learning: bool = True, game_index: int = 0,
              noise_rngs: dict[int, np.random.Generator] | None = None) -> GameRecord:
    """Play one game and, when ``learning``, run invention, adoption and alignment.

    With ``learning=False`` nothing in any agent changes: the speaker does not
    invent and a missing candidate is simply a failed game.
    """
    k = len(population)
    if k < 2:
        raise ValueError("a game needs at least two agents")
    scene = world.scenes[int(streams.scene.integers(len(world.scenes)))]
    s = int(streams.pair.integers(k))
    li = int(streams.pair.integers(k - 1))
    if li >= s:
        li += 1
    speaker, listener = population[s], population[li]
    topic = int(streams.topic.integers(len(scene.entity_ids)))

    def noise(agent):
        return None if noise_rngs is None else noise_rngs[agent.id]

    view_s = perceive_scene(speaker, world.dataset, scene.entity_ids, noise(speaker))
    view_l = perceive_scene(listener, world.dataset, scene.entity_ids, noise(listener))

    production = speaker.produce(view_s, topic) if learning else speaker.produce_read_only(view_s, topic)
    utterance = production.utterance
    # the listener's own production doubles as the coherence probe and its candidate set
    probe = listener.produce_read_only(view_l, topic)
    coherent = utterance is not None and probe.utterance == utterance
    record = GameRecord(game_index, speaker.id, listener.id, scene.id, topic, utterance, None,
                        False, production.invented, False, coherent)
    if utterance is None:
        return record

    known = listener.index_of(utterance) is not None
    pointing = listener.interpret(utterance, view_l) if known else None
    record.listener_pointing = pointing
    record.success = pointing == topic
    if not learning:
        return record

    if record.success:
        speaker.align_success(utterance, view_s, topic, production.candidates)
        listener.align_success(utterance, view_l, topic, probe.candidates)
    elif not known:
        align_failure_unknown_word(speaker, listener, utterance, view_l, topic)
        record.adopted = True
    else:
        align_failure_wrong_pointing(speaker, listener, utterance, view_l, topic)
    return record


class Simulation:
    """A population playing a scheduled sequence of games on one or more scene sets."""

    def __init__(self, population: Sequence[Agent], worlds: dict[str, SceneSet], start: str,
                 seed: int, schedule: Schedule | None = None):
        if len(population) < 2:
            raise ValueError("population needs at least two agents")
        if start not in worlds:
            raise KeyError(f"unknown dataset {start!r}")
        self.population = list(population)
        self.worlds = worlds
        self.current = start
        self.streams = GameStreams.from_seed(seed)
        self.schedule = schedule
        self._pending = list(schedule.events) if schedule else []
        self.learning = True
        self.games_played = 0
        self.applied: list[tuple[int, object]] = []

    def apply(self, event) -> None:
        if isinstance(event, SensorDefect):
            for agent in self.population:
                sensors = sorted(agent.sensors)
                if event.lost_per_agent >= len(sensors):
                    raise ValueError(f"agent {agent.id} would lose all {len(sensors)} sensors")
                lost = agent.rng.choice(len(sensors), size=event.lost_per_agent, replace=False)
                agent.lose_sensors({sensors[i] for i in lost})
        elif isinstance(event, SwitchDataset):
            if event.dataset not in self.worlds:
                raise KeyError(f"unknown dataset {event.dataset!r}")
            self.current = event.dataset
        elif isinstance(event, FreezeLearning):
            self.learning = False
        elif isinstance(event, UnfreezeLearning):
            self.learning = True
        else:
            raise TypeError(f"unknown event {event!r}")
        self.applied.append((self.games_played, event))

    def games(self, n: int) -> Iterator[GameRecord]:
        """Play ``n`` more games, yielding each record and firing due events."""
        for _ in range(n):
            self.games_played += 1
            yield play_game(self.population, self.worlds[self.current], self.streams,
                            self.learning, self.games_played)
            while self._pending and self._pending[0].at == self.games_played:
                self.apply(self._pending.pop(0).event)


def evaluate(population: Sequence[Agent], test: SceneSet, num_games: int, seed: int,
             window: int = 1000, on_record: Callable[[GameRecord], None] | None = None,
             stream: int = 0) -> dict:
    """Frozen evaluation: no invention, adoption or alignment, and private noise streams.

    Returns the metrics over the last ``window`` games and over the whole run.
    ``stream`` separates several evaluations made with the same seed.
    """
    streams = GameStreams.from_seed(seed, EVAL_KEY, stream)
    noise_rngs = {a.id: substream(seed, EVAL_KEY, stream, AGENT_KEY, a.id) for a in population}
    tracker = MetricsTracker(window)
    whole = MetricsTracker(window, history=None)
    for g in range(1, num_games + 1):
        record = play_game(population, test, streams, False, g, noise_rngs)
        tracker.observe(record)
        whole.observe(record)
        if on_record is not None:
            on_record(record)
    snap = tracker.snapshot()
    overall = whole.overall()
    return {
        "games": num_games,
        "window": {k: snap[k] for k in ("success", "coherence", "inventory_size")},
        "overall": {**overall, "inventory_size": whole.inventory_size},
    }
