"""Gaussian prototype concepts and the similarity measures defined over them.

A concept holds one (weight, mean, std) triple per sensor channel. Channel
weights live on a sigmoid and are stored as the sigmoid's abscissa; means and
standard deviations are Welford accumulators.

Every measure comes in two flavours: a readable mapping-based function that
takes :class:`ConceptRepresentation` objects and plain ``{channel: value}``
dicts, and an array kernel (``*_matrix`` / ``*_arrays``) that the agents use on
whole inventories at once. The mapping functions are thin wrappers over the
kernels so there is one copy of each formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

SIGMA_FLOOR = 1e-4
SIGMOID_SLOPE = 0.5
# slope * logit is clipped to this range so the weight never rounds to 0.0 or 1.0
MAX_SIGMOID_ARG = 36.0
TIE_TOL = 1e-12

PerceivedVector = Mapping[str, float]


class IncomparableChannels(ValueError):
    """A concept and a vector (or two concepts) have no channel in common."""


def sigmoid(logit, slope: float = SIGMOID_SLOPE):
    return 1.0 / (1.0 + np.exp(-slope * np.asarray(logit, dtype=float)))


def clip_logit(logit, slope: float = SIGMOID_SLOPE):
    bound = MAX_SIGMOID_ARG / slope
    return np.clip(logit, -bound, bound)


def floored_std(m2, count):
    return np.maximum(np.sqrt(np.asarray(m2, dtype=float) / count), SIGMA_FLOOR)


def welford_step(mean, m2, count, x):
    """One Welford step; works elementwise on scalars or arrays."""
    count = count + 1
    delta = x - mean
    mean = mean + delta / count
    m2 = m2 + delta * (x - mean)
    return mean, m2, count


@dataclass(frozen=True)
class ChannelStat:
    mean: float
    m2: float
    count: int
    weight_logit: float = 0.0

    @classmethod
    def initial(cls, value: float, sigma: float = 0.01, weight_logit: float = 0.0) -> "ChannelStat":
        # count=1 with m2=sigma**2 makes the population std equal sigma at creation
        return cls(float(value), float(sigma) ** 2, 1, float(weight_logit))

    @property
    def variance(self) -> float:
        return self.m2 / self.count

    @property
    def std(self) -> float:
        return max(math.sqrt(self.variance), SIGMA_FLOOR)

    def weight(self, slope: float = SIGMOID_SLOPE) -> float:
        return float(sigmoid(self.weight_logit, slope))


def welford_update(stat: ChannelStat, x: float) -> ChannelStat:
    mean, m2, count = welford_step(stat.mean, stat.m2, stat.count, float(x))
    return ChannelStat(mean, m2, count, stat.weight_logit)


def shift_weight(stat: ChannelStat, step: float, slope: float = SIGMOID_SLOPE) -> ChannelStat:
    """Move the channel weight by ``step`` along the sigmoid abscissa."""
    logit = float(clip_logit(stat.weight_logit + step, slope))
    return ChannelStat(stat.mean, stat.m2, stat.count, logit)


@dataclass
class ConceptRepresentation:
    channels: dict[str, ChannelStat]

    def __post_init__(self):
        if not self.channels:
            raise ValueError("a concept needs at least one channel")

    @classmethod
    def from_values(cls, values: PerceivedVector, sigma: float = 0.01,
                    weight_logit: float = 0.0) -> "ConceptRepresentation":
        return cls({ch: ChannelStat.initial(v, sigma, weight_logit) for ch, v in values.items()})

    def normalized_weights(self, slope: float = SIGMOID_SLOPE) -> dict[str, float]:
        w = {ch: s.weight(slope) for ch, s in self.channels.items()}
        total = sum(w.values())
        return {ch: v / total for ch, v in w.items()}

    def _arrays(self, order: Sequence[str], slope: float):
        """(mean, std, weight, present) arrays aligned to ``order``."""
        n = len(order)
        mean, std, weight = np.zeros(n), np.ones(n), np.zeros(n)
        present = np.zeros(n, dtype=bool)
        for j, ch in enumerate(order):
            stat = self.channels.get(ch)
            if stat is not None:
                mean[j], std[j], weight[j], present[j] = stat.mean, stat.std, stat.weight(slope), True
        return mean, std, weight, present


# ---------------------------------------------------------------------------
# Array kernels
# ---------------------------------------------------------------------------

def channel_similarity_matrix(mean, std, X):
    """exp(-|z|) for every (concept, entity, channel); shapes (W,L),(W,L),(n,L) -> (W,n,L)."""
    return np.exp(-np.abs(X[None, :, :] - mean[:, None, :]) / std[:, None, :])


def similarity_matrix(mean, std, weight, cmask, X, xmask):
    """Weighted entity-concept similarity for W concepts against n entities.

    ``cmask`` (W, L) marks channels a concept has, ``xmask`` (n, L) channels an
    entity was perceived on. Weights are renormalised over the intersection.
    Returns (W, n); NaN where the intersection is empty.
    """
    cs = channel_similarity_matrix(mean, std, X)
    w = (weight * cmask)[:, None, :] * xmask[None, :, :]
    total = w.sum(axis=-1)
    num = (w * cs).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, num / total, np.nan)


def hellinger_similarity_arrays(mu_a, sd_a, mu_b, sd_b):
    var_sum = sd_a ** 2 + sd_b ** 2
    bc = np.sqrt(2.0 * sd_a * sd_b / var_sum) * np.exp(-((mu_a - mu_b) ** 2) / (4.0 * var_sum))
    return 1.0 - np.sqrt(np.clip(1.0 - bc, 0.0, None))


def concept_similarity_arrays(mean_q, std_q, w_q, mask_q, mean_r, std_r, w_r, mask_r):
    """Concept-concept similarity of each row of the ``*_q`` arrays against one concept ``r``.

    Weights are normalised over each concept's own channel set before the sum
    over shared channels. Returns (W,); NaN for rows sharing no channel with r.
    """
    mean_q, std_q = np.atleast_2d(mean_q), np.atleast_2d(std_q)
    w_q, mask_q = np.atleast_2d(w_q), np.atleast_2d(mask_q)
    wq = np.where(mask_q, w_q, 0.0)
    nq = wq / wq.sum(axis=1, keepdims=True)
    wr = np.where(mask_r, w_r, 0.0)
    nr = wr / wr.sum()
    shared = mask_q & mask_r[None, :]
    hs = hellinger_similarity_arrays(mean_q, std_q, mean_r[None, :], std_r[None, :])
    terms = hs * (1.0 - np.abs(nq - nr)) * (nq + nr) / 2.0
    out = np.where(shared, terms, 0.0).sum(axis=1)
    return np.where(shared.any(axis=1), out, np.nan)


@lru_cache(maxsize=64)
def subset_masks(k: int, include_empty: bool) -> np.ndarray:
    """All subsets of k items as a bool matrix, ordered by size then lexicographically."""
    rows = []
    for r in range(0 if include_empty else 1, k + 1):
        for combo in combinations(range(k), r):
            row = np.zeros(k, dtype=bool)
            row[list(combo)] = True
            rows.append(row)
    masks = np.array(rows, dtype=bool).reshape(len(rows), k)
    masks.setflags(write=False)
    return masks


def _others_max(a, topic: int, axis: int):
    rest = a.copy()
    if axis == 0:
        rest[topic] = -np.inf
    else:
        rest[:, topic] = -np.inf
    return rest.max(axis=axis)


def positive_channels(cs, topic: int, shared):
    """Channels on which the topic is strictly more similar than every other entity."""
    return shared & (cs[topic] > _others_max(cs, topic, 0))


# free-channel count up to which subsets are enumerated outright
ENUMERATION_LIMIT = 10


def best_subset_mask(cs, topic: int, shared, max_channels: int | None = None):
    """Pick the channel subset with the highest uniform-weight discriminative power.

    ``cs`` is the (n, L) per-channel similarity of one concept to each context
    entity, with columns in channel-id order. Candidate subsets contain every
    positive channel and lie within ``shared``. Ties go to the smaller subset,
    then the lexicographically first one.

    The search is exact. Small free sets are enumerated; larger ones go
    through a branch-and-bound with the same tie rule.
    """
    shared = np.asarray(shared, dtype=bool)
    if not shared.any():
        raise IncomparableChannels("no shared channel")
    pos = positive_channels(cs, topic, shared)
    free = np.flatnonzero(shared & ~pos)
    if max_channels is not None and len(free) > max_channels:
        standalone = cs[topic, free] - _others_max(cs, topic, 0)[free]
        keep = np.argsort(-standalone, kind="stable")[:max_channels]
        free = np.sort(free[keep])
    chosen = pos.copy()
    if len(free) <= ENUMERATION_LIMIT:
        masks = subset_masks(len(free), bool(pos.any()))
        base = cs[:, pos].sum(axis=1)
        sizes = masks.sum(axis=1) + pos.sum()
        means = (base[None, :] + masks.astype(float) @ cs[:, free].T) / sizes[:, None]
        dp = means[:, topic] - _others_max(means, topic, 1)
        best = int(np.flatnonzero(dp >= dp.max() - TIE_TOL)[0])
        chosen[free[masks[best]]] = True
    else:
        chosen[free[_search_free_channels(cs, topic, pos, free)]] = True
    return chosen


class _SubsetSearch:
    """Branch-and-bound over free-channel subsets, one subset size at a time.

    For a fixed size r the discriminative power of a subset S is
    min_e sum_{j in S} (cs[topic, j] - cs[e, j]) / r. A minimum never exceeds
    any average of its terms, so the best completion of a partial subset is
    bounded by the largest remaining gaps of each entity and of averaged
    entities (pairs and the whole context).
    """

    # Bounds are compared with this margin. It covers rounding in the sums and
    # lets exact ties with the incumbent be pruned; it is far below TIE_TOL.
    MARGIN = 1e-13
    def __init__(self, cs, topic, pos, free):
        others = np.delete(cs, topic, axis=0)
        gaps = cs[topic][None, :] - others  # (n-1, L)
        n = len(gaps)
        mixes = [np.eye(n)]
        if n > 1:
            pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
            mix = np.zeros((len(pairs), n))
            for row, (a, b) in enumerate(pairs):
                mix[row, [a, b]] = 0.5
            mixes += [mix, np.full((1, n), 1.0 / n)]
        mix = np.concatenate(mixes)
        self.n = n
        self.base = gaps[:, pos].sum(axis=1)
        self.gaps = gaps[:, free]
        self.k = len(free)
        self.p = int(pos.sum())
        self.mix = mix
        # top[i][:, m]: per bound row, the sum of the m largest gaps among free[i:]
        rows = mix @ self.gaps
        self.top = []
        for i in range(self.k + 1):
            tail = -np.sort(-rows[:, i:], axis=1)
            self.top.append(np.concatenate([np.zeros((len(rows), 1)), np.cumsum(tail, axis=1)], axis=1))

    def bound(self, acc, start, remaining, r):
        return float((self.mix @ acc + self.top[start][:, remaining]).min()) / r

    def best_value(self, m, best=-np.inf):
        """Highest discriminative power over subsets with m free channels, if above ``best``."""
        r = self.p + m
        stack = [(self.base, 0, m)]
        while stack:
            acc, start, remaining = stack.pop()
            if remaining == 0:
                best = max(best, float(acc.min()) / r)
                continue
            if self.bound(acc, start, remaining, r) <= best + self.MARGIN:
                continue
            for j in range(self.k - remaining, start - 1, -1):
                stack.append((acc + self.gaps[:, j], j + 1, remaining - 1))
        return best

    def first_reaching(self, m, target):
        """Lexicographically first subset of m free channels with value >= target."""
        r = self.p + m
        stack = [(self.base, 0, m, ())]
        while stack:
            acc, start, remaining, picked = stack.pop()
            if remaining == 0:
                if float(acc.min()) / r >= target:
                    return list(picked)
                continue
            if self.bound(acc, start, remaining, r) < target - self.MARGIN:
                continue
            for j in range(self.k - remaining, start - 1, -1):
                stack.append((acc + self.gaps[:, j], j + 1, remaining - 1, picked + (j,)))
        return None


def _search_free_channels(cs, topic, pos, free):
    search = _SubsetSearch(cs, topic, pos, free)
    sizes = range(0 if pos.any() else 1, len(free) + 1)
    best = -np.inf
    for m in sizes:
        best = search.best_value(m, best)
    for m in sizes:
        picked = search.first_reaching(m, best - TIE_TOL)
        if picked is not None:
            return np.array(picked, dtype=int)
    raise AssertionError("subset search lost its optimum")


# ---------------------------------------------------------------------------
# Mapping-based API
# ---------------------------------------------------------------------------

def _vector_arrays(vectors: Sequence[PerceivedVector], order: Sequence[str]):
    X = np.zeros((len(vectors), len(order)))
    mask = np.zeros_like(X, dtype=bool)
    for i, vec in enumerate(vectors):
        for j, ch in enumerate(order):
            if ch in vec:
                X[i, j] = vec[ch]
                mask[i, j] = True
    return X, mask


def _union_order(concept: ConceptRepresentation, vectors: Iterable[PerceivedVector]):
    names = set(concept.channels)
    for v in vectors:
        names.update(v)
    return sorted(names)


def channel_similarity(stat: ChannelStat, x: float) -> float:
    return math.exp(-abs((x - stat.mean) / stat.std))


def entity_concept_similarity(concept: ConceptRepresentation, x: PerceivedVector,
                              slope: float = SIGMOID_SLOPE) -> float:
    return float(_similarities(concept, [x], slope)[0])


def _similarities(concept, vectors, slope):
    order = _union_order(concept, vectors)
    mean, std, weight, present = concept._arrays(order, slope)
    X, xmask = _vector_arrays(vectors, order)
    sims = similarity_matrix(mean[None], std[None], weight[None], present[None], X, xmask)[0]
    if np.isnan(sims).any():
        raise IncomparableChannels("concept and entity share no channel")
    return sims


def hellinger_similarity(a: tuple[float, float], b: tuple[float, float]) -> float:
    """One minus the Hellinger distance between two univariate normals given as (mean, std)."""
    return float(hellinger_similarity_arrays(a[0], a[1], b[0], b[1]))


def concept_concept_similarity(cq: ConceptRepresentation, cr: ConceptRepresentation,
                               slope: float = SIGMOID_SLOPE) -> float:
    order = sorted(set(cq.channels) | set(cr.channels))
    q = cq._arrays(order, slope)
    r = cr._arrays(order, slope)
    value = concept_similarity_arrays(*q, *r)[0]
    if np.isnan(value):
        raise IncomparableChannels("concepts share no channel")
    return float(value)


def discriminative_power(concept: ConceptRepresentation, topic: PerceivedVector,
                         context: Sequence[PerceivedVector], slope: float = SIGMOID_SLOPE) -> float:
    """Similarity to the topic minus the similarity to the closest other entity."""
    if not context:
        raise ValueError("context must hold at least one non-topic entity")
    sims = _similarities(concept, [topic, *context], slope)
    return float(sims[0] - sims[1:].max())


def best_channel_subset(concept: ConceptRepresentation, topic: PerceivedVector,
                        context: Sequence[PerceivedVector],
                        max_channels: int | None = None) -> frozenset[str]:
    order = _union_order(concept, [topic, *context])
    mean, std, _, present = concept._arrays(order, SIGMOID_SLOPE)
    X, xmask = _vector_arrays([topic, *context], order)
    shared = present & xmask.all(axis=0)
    cs = channel_similarity_matrix(mean[None], std[None], X)[0]
    chosen = best_subset_mask(cs, 0, shared, max_channels)
    return frozenset(ch for ch, keep in zip(order, chosen) if keep)
