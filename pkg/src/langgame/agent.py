"""Language-game agents: lexicon storage, production, interpretation and alignment."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .concepts import (ChannelStat, ConceptRepresentation, best_subset_mask,
                       channel_similarity_matrix, clip_logit, concept_similarity_arrays,
                       floored_std, sigmoid, similarity_matrix, welford_step)
from .world import PerceptionProfile, ScenePerception

CONSONANTS = "bdfgklmnprstvxz"
VOWELS = "aeiou"
FORM_PATTERN = re.compile(r"(?:[bdfgklmnprstvxz][aeiou]){3}")


class DuplicateForm(ValueError):
    pass


class InternalProtocolError(RuntimeError):
    pass


class UnknownSensor(ValueError):
    pass


@dataclass(frozen=True)
class LearningParams:
    s_init: float = 0.5
    s_reward: float = 0.1
    s_punish: float = -0.1
    s_inhibit: float = -0.02
    sigma_init: float = 0.01
    weight_logit_init: float = 0.0
    sigmoid_slope: float = 0.5
    c_reward: float = 1.0
    c_punish: float = -5.0
    max_subset_channels: int | None = None


@dataclass(frozen=True)
class Word:
    form: str
    concept: ConceptRepresentation
    score: float


@dataclass
class ProductionResult:
    utterance: str | None
    used: int | None  # inventory index
    candidates: list[int]
    invented: bool = False
    adequacy: dict[int, float] = field(default_factory=dict)


def generate_form(rng: np.random.Generator, existing) -> str:
    while True:
        c = rng.integers(len(CONSONANTS), size=3)
        v = rng.integers(len(VOWELS), size=3)
        form = "".join(CONSONANTS[i] + VOWELS[j] for i, j in zip(c, v))
        if form not in existing:
            return form


class Agent:
    """An agent with a fixed channel universe and a growing lexicon.

    Concepts are rows of per-channel arrays over ``channels`` (sorted ids), with
    ``present`` marking the channels each concept was created on. Sensors can
    only shrink; a lost sensor keeps its statistics but is no longer perceived.
    """

    _GROW = 32

    def __init__(self, id: int, channels: Sequence[str], sensors: Sequence[str] | None = None,
                 profile: PerceptionProfile | None = None, params: LearningParams | None = None,
                 rng: np.random.Generator | None = None,
                 noise_rng: np.random.Generator | None = None):
        self.id = int(id)
        self.channels = tuple(sorted(channels))
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channel ids")
        sensors = self.channels if sensors is None else sensors
        unknown = set(sensors) - set(self.channels)
        if unknown:
            raise UnknownSensor(f"sensors outside the channel universe: {sorted(unknown)}")
        self.sensor_mask = np.array([ch in set(sensors) for ch in self.channels])
        if not self.sensor_mask.any():
            raise ValueError("an agent needs at least one sensor")
        self.profile = profile or PerceptionProfile()
        self.params = params or LearningParams()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.noise_rng = noise_rng if noise_rng is not None else np.random.default_rng()
        self.forms: list[str] = []
        self._index: dict[str, int] = {}
        L = len(self.channels)
        self._mean = np.zeros((0, L))
        self._m2 = np.zeros((0, L))
        self._count = np.zeros((0, L), dtype=np.int64)
        self._logit = np.zeros((0, L))
        self._present = np.zeros((0, L), dtype=bool)
        self._score = np.zeros(0)
        # derived per-row caches, refreshed whenever a row's statistics change
        self._std = np.zeros((0, L))
        self._weight = np.zeros((0, L))
        self._refresh_shift()

    def _refresh_shift(self):
        self.shift_array = np.array([self.profile.shift.get(ch, 0.0) for ch in self.channels])

    # -- storage -----------------------------------------------------------

    @property
    def sensors(self) -> frozenset[str]:
        return frozenset(ch for ch, on in zip(self.channels, self.sensor_mask) if on)

    def __len__(self) -> int:
        return len(self.forms)

    @property
    def scores(self) -> np.ndarray:
        return self._score[: len(self.forms)]

    def _rows(self):
        n = len(self.forms)
        return self._mean[:n], self._std[:n], self._weight[:n], self._present[:n]

    def _refresh_row(self, i: int) -> None:
        self._std[i] = floored_std(self._m2[i], self._count[i])
        self._weight[i] = sigmoid(self._logit[i], self.params.sigmoid_slope)

    def _append(self, form: str, values: np.ndarray, mask: np.ndarray) -> int:
        n = len(self.forms)
        if n == len(self._score):
            extra = max(self._GROW, n)
            pad = lambda a, v=0: np.concatenate([a, np.full((extra,) + a.shape[1:], v, dtype=a.dtype)])
            self._mean, self._m2 = pad(self._mean), pad(self._m2)
            self._count, self._logit = pad(self._count, 1), pad(self._logit)
            self._present, self._score = pad(self._present, False), pad(self._score)
            self._std, self._weight = pad(self._std), pad(self._weight)
        p = self.params
        self._mean[n] = np.where(mask, values, 0.0)
        self._m2[n] = p.sigma_init ** 2
        self._count[n] = 1
        self._logit[n] = p.weight_logit_init
        self._present[n] = mask
        self._score[n] = p.s_init
        self._refresh_row(n)
        self.forms.append(form)
        self._index[form] = n
        return n

    def add_word(self, form: str, concept: ConceptRepresentation, score: float | None = None) -> int:
        """Insert a word with explicit concept statistics (fixtures, checkpoint loading)."""
        if form in self._index:
            raise DuplicateForm(form)
        col = {ch: j for j, ch in enumerate(self.channels)}
        unknown = set(concept.channels) - set(col)
        if unknown:
            raise UnknownSensor(f"concept channels outside the universe: {sorted(unknown)}")
        mask = np.zeros(len(self.channels), dtype=bool)
        values = np.zeros(len(self.channels))
        for ch, stat in concept.channels.items():
            mask[col[ch]], values[col[ch]] = True, stat.mean
        i = self._append(form, values, mask)
        for ch, stat in concept.channels.items():
            j = col[ch]
            self._m2[i, j], self._count[i, j], self._logit[i, j] = stat.m2, stat.count, stat.weight_logit
        if score is not None:
            self._score[i] = score
        self._refresh_row(i)
        return i

    def index_of(self, form: str) -> int | None:
        return self._index.get(form)

    def concept(self, i: int) -> ConceptRepresentation:
        stats = {}
        for j, ch in enumerate(self.channels):
            if self._present[i, j]:
                stats[ch] = ChannelStat(float(self._mean[i, j]), float(self._m2[i, j]),
                                        int(self._count[i, j]), float(self._logit[i, j]))
        return ConceptRepresentation(stats)

    def word(self, form: str) -> Word:
        i = self._index[form]
        return Word(form, self.concept(i), float(self._score[i]))

    @property
    def inventory(self) -> list[Word]:
        return [self.word(f) for f in self.forms]

    def view(self, vectors: Sequence[dict[str, float]]) -> ScenePerception:
        """Build a perception from explicit ``{channel: value}`` vectors (tests, notebooks)."""
        X = np.zeros((len(vectors), len(self.channels)))
        mask = np.zeros_like(X, dtype=bool)
        for i, vec in enumerate(vectors):
            for j, ch in enumerate(self.channels):
                if ch in vec and self.sensor_mask[j]:
                    X[i, j] = vec[ch]
                    mask[i, j] = True
        return ScenePerception(X, mask)

    # -- production ----------------------------------------------------------

    def similarities(self, view: ScenePerception) -> np.ndarray:
        """(words, entities) similarity; NaN for concepts sharing no channel with the scene."""
        mean, std, weight, present = self._rows()
        return similarity_matrix(mean, std, weight, present, view.values, view.mask)

    def discriminative_powers(self, view: ScenePerception, topic: int) -> np.ndarray:
        return _topic_margin(self.similarities(view), topic)

    def produce_read_only(self, view: ScenePerception, topic: int) -> ProductionResult:
        """Pick the candidate with the highest score * discriminative power, or nothing."""
        if not self.forms:
            return ProductionResult(None, None, [])
        sims = self.similarities(view)
        dp = _topic_margin(sims, topic)
        with np.errstate(invalid="ignore"):
            cand = np.flatnonzero(dp > 0)
        if len(cand) == 0:
            return ProductionResult(None, None, [])
        adequacy = self.scores[cand] * dp[cand]
        # argmax keeps the first maximum, i.e. the earliest-invented word
        best = int(cand[int(np.argmax(adequacy))])
        return ProductionResult(self.forms[best], best, cand.tolist(), False,
                                dict(zip(cand.tolist(), adequacy.tolist())))

    def produce(self, view: ScenePerception, topic: int) -> ProductionResult:
        result = self.produce_read_only(view, topic)
        if result.utterance is None:
            i = self.invent(view, topic)
            return ProductionResult(self.forms[i], i, [], True)
        return result

    def invent(self, view: ScenePerception, topic: int) -> int:
        form = generate_form(self.rng, self._index)
        return self._append(form, view.values[topic], view.mask[topic])

    def adopt(self, form: str, view: ScenePerception, topic: int) -> int:
        if form in self._index:
            raise DuplicateForm(form)
        return self._append(form, view.values[topic], view.mask[topic])

    def interpret(self, form: str, view: ScenePerception) -> int | None:
        i = self._index.get(form)
        if i is None:
            return None
        mean, std, weight, present = self._rows()
        sims = similarity_matrix(mean[i:i + 1], std[i:i + 1], weight[i:i + 1],
                                 present[i:i + 1], view.values, view.mask)[0]
        if np.isnan(sims).all():
            return None
        return int(np.nanargmax(sims))

    # -- alignment -----------------------------------------------------------

    def _require(self, form: str) -> int:
        i = self._index.get(form)
        if i is None:
            raise InternalProtocolError(f"agent {self.id} does not know {form!r}")
        return i

    def adjust_score(self, form: str, delta: float) -> None:
        i = self._require(form)
        self._score[i] = min(max(self._score[i] + delta, 0.0), 1.0)

    def inhibit_competitors(self, used: int, competitors: Sequence[int]) -> None:
        """Lower each competitor's score in proportion to its similarity to the used concept."""
        comps = np.asarray([c for c in competitors if c != used], dtype=int)
        if len(comps) == 0:
            return
        mean, std, weight, present = self._rows()
        sims = concept_similarity_arrays(mean[comps], std[comps], weight[comps], present[comps],
                                         mean[used], std[used], weight[used], present[used])
        sims = np.nan_to_num(sims, nan=0.0)
        self._score[comps] = np.clip(self._score[comps] + self.params.s_inhibit * sims, 0.0, 1.0)

    def update_concept(self, form: str, view: ScenePerception, topic: int) -> None:
        """Fold the topic into the concept, then re-weight channels by the best discriminating subset."""
        i = self._require(form)
        p = self.params
        channels = self._present[i] & view.mask[topic]
        if not channels.any():
            return
        x = view.values[topic]
        mean, m2, count = welford_step(self._mean[i], self._m2[i], self._count[i], x)
        self._mean[i] = np.where(channels, mean, self._mean[i])
        self._m2[i] = np.where(channels, m2, self._m2[i])
        self._count[i] = np.where(channels, count, self._count[i])

        self._refresh_row(i)
        shared = channels & view.mask.all(axis=0)
        if not shared.any() or len(view) < 2:
            return
        cs = channel_similarity_matrix(self._mean[i][None], self._std[i][None], view.values)[0]
        chosen = best_subset_mask(cs, topic, shared, p.max_subset_channels)
        step = np.where(chosen, p.c_reward, p.c_punish)
        self._logit[i] = np.where(shared, clip_logit(self._logit[i] + step, p.sigmoid_slope),
                                  self._logit[i])
        self._refresh_row(i)

    def align_success(self, form: str, view: ScenePerception, topic: int,
                      candidates: Sequence[int] | None = None) -> None:
        """Reward the used word, inhibit competing candidates, update the used concept.

        ``candidates`` is this agent's own candidate set for the game; it is
        recomputed from ``view`` when not supplied.
        """
        i = self._require(form)
        if candidates is None:
            candidates = self.produce_read_only(view, topic).candidates
        self.adjust_score(form, self.params.s_reward)
        self.inhibit_competitors(i, candidates)
        self.update_concept(form, view, topic)

    def lose_sensors(self, lost) -> None:
        lost = set(lost)
        missing = lost - self.sensors
        if missing:
            raise UnknownSensor(f"agent {self.id} has no sensor(s) {sorted(missing)}")
        for j, ch in enumerate(self.channels):
            if ch in lost:
                self.sensor_mask[j] = False
        if not self.sensor_mask.any():
            raise ValueError(f"agent {self.id} lost every sensor")

    # -- persistence -----------------------------------------------------------

    def to_dict(self) -> dict:
        n = len(self.forms)
        return {
            "id": self.id,
            "channels": list(self.channels),
            "sensors": sorted(self.sensors),
            "perception": {"shift": dict(sorted(self.profile.shift.items())),
                           "noise_std": self.profile.noise_std},
            "params": dict(self.params.__dict__),
            "rng": self.rng.bit_generator.state,
            "noise_rng": self.noise_rng.bit_generator.state,
            "inventory": [
                {
                    "form": self.forms[i],
                    "score": float(self._score[i]),
                    "channels": {
                        ch: [float(self._mean[i, j]), float(self._m2[i, j]),
                             int(self._count[i, j]), float(self._logit[i, j])]
                        for j, ch in enumerate(self.channels) if self._present[i, j]
                    },
                }
                for i in range(n)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Agent":
        rng = _restore_rng(doc["rng"])
        noise_rng = _restore_rng(doc["noise_rng"])
        perception = doc["perception"]
        agent = cls(doc["id"], doc["channels"], doc["sensors"],
                    PerceptionProfile(dict(perception["shift"]), perception["noise_std"]),
                    LearningParams(**doc["params"]), rng, noise_rng)
        for entry in doc["inventory"]:
            concept = ConceptRepresentation(
                {ch: ChannelStat(mean, m2, count, logit)
                 for ch, (mean, m2, count, logit) in entry["channels"].items()})
            agent.add_word(entry["form"], concept, entry["score"])
        return agent


def _topic_margin(sims: np.ndarray, topic: int) -> np.ndarray:
    """Similarity to the topic minus the best similarity to any other entity, per row."""
    others = sims.copy()
    others[:, topic] = -np.inf
    return sims[:, topic] - others.max(axis=1)


def _restore_rng(state: dict) -> np.random.Generator:
    bitgen = getattr(np.random, state["bit_generator"])()
    bitgen.state = state
    return np.random.Generator(bitgen)


def align_failure_wrong_pointing(speaker: Agent, listener: Agent, form: str,
                                 listener_view: ScenePerception, topic: int) -> None:
    """Listener pointed at the wrong entity: both punish the word, only the listener re-fits it."""
    speaker.adjust_score(form, speaker.params.s_punish)
    listener.adjust_score(form, listener.params.s_punish)
    listener.update_concept(form, listener_view, topic)


def align_failure_unknown_word(speaker: Agent, listener: Agent, form: str,
                               listener_view: ScenePerception, topic: int) -> int:
    speaker.adjust_score(form, speaker.params.s_punish)
    return listener.adopt(form, listener_view, topic)
