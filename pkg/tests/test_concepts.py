import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from langgame.concepts import (
    SIGMA_FLOOR, ChannelStat, ConceptRepresentation, IncomparableChannels, best_channel_subset,
    best_subset_mask, channel_similarity, concept_concept_similarity, discriminative_power,
    entity_concept_similarity, hellinger_similarity, shift_weight, sigmoid, subset_masks,
    welford_update)

import langgame.concepts as concepts
from oracles import brute_force_subset, hellinger_by_quadrature

unit = st.floats(0.0, 1.0, allow_nan=False)
stds = st.floats(1e-3, 0.5, allow_nan=False)


def stat(mean, std=1.0, logit=0.0):
    return ChannelStat(mean, std * std, 1, logit)


# -- entity-concept similarity ------------------------------------------------

def test_identical_entity_has_similarity_one():
    concept = ConceptRepresentation.from_values({"a": 0.2, "b": 0.7})
    assert entity_concept_similarity(concept, {"a": 0.2, "b": 0.7}) == pytest.approx(1.0)


def test_two_channel_example():
    concept = ConceptRepresentation({"a": stat(0.0), "b": stat(0.0)})
    expected = 0.5 * 1.0 + 0.5 * math.exp(-2.0)
    assert entity_concept_similarity(concept, {"a": 0.0, "b": 2.0}) == pytest.approx(expected, abs=1e-12)


def test_three_sigma_channel():
    assert channel_similarity(stat(0.0, 0.1), 0.3) == pytest.approx(math.exp(-3.0), abs=1e-12)


def test_similarity_uses_channel_intersection_only():
    concept = ConceptRepresentation({"a": stat(0.0), "b": stat(5.0)})
    assert entity_concept_similarity(concept, {"a": 0.0, "z": 9.0}) == pytest.approx(1.0)


def test_disjoint_channels_are_incomparable():
    concept = ConceptRepresentation({"a": stat(0.0)})
    with pytest.raises(IncomparableChannels):
        entity_concept_similarity(concept, {"b": 0.0})


def test_zero_variance_is_floored():
    concept = ConceptRepresentation({"a": ChannelStat(0.5, 0.0, 4, 0.0)})
    assert concept.channels["a"].std == SIGMA_FLOOR
    assert np.isfinite(entity_concept_similarity(concept, {"a": 0.5 + 1e-3}))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(unit, stds, st.floats(-10, 10)), min_size=1, max_size=5), st.data())
def test_entity_similarity_in_unit_interval(spec, data):
    concept = ConceptRepresentation({f"c{i}": stat(m, s, w) for i, (m, s, w) in enumerate(spec)})
    x = {f"c{i}": data.draw(unit) for i in range(len(spec))}
    assert 0.0 <= entity_concept_similarity(concept, x) <= 1.0 + 1e-12


# -- Hellinger and concept-concept similarity -----------------------------------

def test_hellinger_identical_is_one():
    assert hellinger_similarity((0.3, 0.05), (0.3, 0.05)) == pytest.approx(1.0)


def test_hellinger_far_apart_is_near_zero():
    # exp(-12.5) overlap: 1 - sqrt(1 - exp(-12.5)) ~ 1.86e-6
    assert hellinger_similarity((0.0, 0.01), (0.1, 0.01)) == pytest.approx(1.863328321971558e-06, rel=1e-9)


def test_hellinger_equal_means_different_widths():
    # the closed form and quadrature agree on 0.67508; see the decisions ledger
    value = hellinger_similarity((0.5, 0.1), (0.5, 0.2))
    assert value == pytest.approx(1 - math.sqrt(1 - math.sqrt(0.8)), abs=1e-12)
    assert value == pytest.approx(hellinger_by_quadrature((0.5, 0.1), (0.5, 0.2)), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(unit, stds, unit, stds)
def test_hellinger_symmetric_and_bounded(m1, s1, m2, s2):
    a = hellinger_similarity((m1, s1), (m2, s2))
    b = hellinger_similarity((m2, s2), (m1, s1))
    assert a == pytest.approx(b, abs=1e-12)
    assert -1e-12 <= a <= 1.0 + 1e-12


def test_concept_similarity_weight_mismatch_example():
    # identical Gaussians, normalised weights (0.8, 0.2) against (0.2, 0.8)
    logit = lambda w: 2.0 * math.log(w / (1 - w))
    q = ConceptRepresentation({"a": stat(0.5, 0.1, logit(0.8)), "b": stat(0.5, 0.1, logit(0.2))})
    r = ConceptRepresentation({"a": stat(0.5, 0.1, logit(0.2)), "b": stat(0.5, 0.1, logit(0.8))})
    assert concept_concept_similarity(q, r) == pytest.approx(0.4, abs=1e-12)


def test_concept_self_similarity_with_uniform_weights_is_one():
    c = ConceptRepresentation({"a": stat(0.1, 0.1), "b": stat(0.9, 0.3), "c": stat(0.4, 0.2)})
    assert concept_concept_similarity(c, c) == pytest.approx(1.0)


def test_concepts_without_shared_channel():
    with pytest.raises(IncomparableChannels):
        concept_concept_similarity(ConceptRepresentation({"a": stat(0.0)}),
                                   ConceptRepresentation({"b": stat(0.0)}))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(unit, stds, st.floats(-8, 8), unit, stds, st.floats(-8, 8)),
                min_size=1, max_size=4))
def test_concept_similarity_symmetric_bounded(spec):
    q = ConceptRepresentation({f"c{i}": stat(a, b, c) for i, (a, b, c, *_) in enumerate(spec)})
    r = ConceptRepresentation({f"c{i}": stat(d, e, f) for i, (*_, d, e, f) in enumerate(spec)})
    v = concept_concept_similarity(q, r)
    assert v == pytest.approx(concept_concept_similarity(r, q), abs=1e-12)
    assert -1e-12 <= v <= 1.0 + 1e-12


# -- Welford and weight shifting --------------------------------------------------

def test_welford_three_observations():
    v, d, sigma = 0.4, 0.3, 0.01
    s = ChannelStat.initial(v, sigma)
    for x in (v, v + d):
        s = welford_update(s, x)
    assert s.count == 3
    assert s.mean == pytest.approx(v + d / 3, abs=1e-15)
    sample = np.array([v, v, v + d])
    # the initial sigma**2 offset is carried through unchanged
    assert s.m2 == pytest.approx(sigma ** 2 + ((sample - sample.mean()) ** 2).sum(), abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=200))
def test_welford_matches_batch(xs):
    s = ChannelStat(xs[0], 0.0, 1)
    for x in xs[1:]:
        s = welford_update(s, x)
    arr = np.array(xs)
    assert s.mean == pytest.approx(arr.mean(), abs=1e-9)
    assert s.variance == pytest.approx(arr.var(), abs=1e-7)


def test_shift_weight_examples():
    s = ChannelStat.initial(0.5)
    assert shift_weight(s, 1.0).weight() == pytest.approx(0.6224593312018546, abs=1e-7)
    assert shift_weight(s, -5.0).weight() == pytest.approx(0.07585818002124355, abs=1e-7)


def test_weight_never_saturates():
    s = ChannelStat.initial(0.5)
    for _ in range(10000):
        s = shift_weight(s, -5.0)
    assert 0.0 < s.weight() < 1.0
    for _ in range(20000):
        s = shift_weight(s, 1.0)
    assert 0.0 < s.weight() < 1.0


@given(st.floats(-50, 50), st.floats(-5, 5))
def test_shift_weight_is_monotone(logit, step):
    s = ChannelStat(0.0, 1.0, 1, logit)
    before, after = s.weight(), shift_weight(s, step).weight()
    if step > 0:
        assert after >= before
    elif step < 0:
        assert after <= before


def test_sigmoid_slope_default():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(2.0) == pytest.approx(1 / (1 + math.exp(-1.0)))


# -- discriminative power and subset search -------------------------------------------

def test_discriminative_power_example():
    concept = ConceptRepresentation({"a": stat(0.0, 1.0)})
    topic = {"a": -math.log(0.9)}
    others = [{"a": -math.log(0.5)}, {"a": -math.log(0.3)}]
    assert discriminative_power(concept, topic, others) == pytest.approx(0.4, abs=1e-12)


def test_topic_duplicated_in_context_is_not_discriminative():
    concept = ConceptRepresentation.from_values({"a": 0.3, "b": 0.6})
    topic = {"a": 0.35, "b": 0.55}
    assert discriminative_power(concept, topic, [dict(topic), {"a": 0.9, "b": 0.1}]) <= 0


def test_discriminative_power_needs_context():
    with pytest.raises(ValueError):
        discriminative_power(ConceptRepresentation.from_values({"a": 0.3}), {"a": 0.3}, [])


def _vector(cs_row):
    return {f"c{j + 1}": -math.log(v) for j, v in enumerate(cs_row)}


def test_best_subset_adds_a_non_positive_channel():
    # channel 1 alone gives 0.4; adding channel 2 (where the topic is beaten) gives 0.425
    cs = np.array([[1.0, 0.9, 0.2], [0.6, 0.1, 0.9], [0.1, 0.95, 0.9]])
    concept = ConceptRepresentation({f"c{j}": stat(0.0) for j in (1, 2, 3)})
    chosen = best_channel_subset(concept, _vector(cs[0]), [_vector(cs[1]), _vector(cs[2])])
    assert chosen == {"c1", "c2"}
    assert brute_force_subset(cs, 0, [0, 1, 2]) == (0, 1)


def test_best_subset_all_positive_keeps_everything():
    cs = np.array([[0.9, 0.9], [0.1, 0.2], [0.3, 0.1]])
    assert best_subset_mask(cs, 0, np.array([True, True])).tolist() == [True, True]


def test_best_subset_without_positive_channel():
    cs = np.array([[0.2, 0.5], [0.9, 0.6], [0.1, 0.1]])
    chosen = best_subset_mask(cs, 0, np.array([True, True]))
    assert tuple(np.flatnonzero(chosen)) == brute_force_subset(cs, 0, [0, 1])


def test_best_subset_tie_prefers_smaller_then_lexicographic():
    cs = np.array([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]])
    assert np.flatnonzero(best_subset_mask(cs, 0, np.ones(3, bool))).tolist() == [0]


def test_best_subset_respects_shared_mask():
    cs = np.array([[0.9, 0.9, 0.9], [0.1, 0.1, 0.95]])
    chosen = best_subset_mask(cs, 0, np.array([True, False, True]))
    assert not chosen[1]


def test_subset_masks_order():
    masks = subset_masks(3, True)
    as_tuples = [tuple(np.flatnonzero(m)) for m in masks]
    expected = [c for r in range(4) for c in combinations(range(3), r)]
    assert as_tuples == expected


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(1, 5), st.data())
def test_best_subset_matches_powerset(n, L, data):
    cs = np.array(data.draw(st.lists(st.lists(st.floats(0.01, 1.0), min_size=L, max_size=L),
                                     min_size=n, max_size=n)))
    topic = data.draw(st.integers(0, n - 1))
    shared = np.array(data.draw(st.lists(st.booleans(), min_size=L, max_size=L)))
    if not shared.any():
        shared[0] = True
    chosen = best_subset_mask(cs, topic, shared)
    assert tuple(np.flatnonzero(chosen)) == brute_force_subset(cs, topic, np.flatnonzero(shared))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(1, 9), st.booleans(), st.data())
def test_branch_and_bound_matches_powerset(n, L, coarse, data):
    # coarse values make ties and duplicated entities common
    values = st.sampled_from([0.1, 0.5, 0.9]) if coarse else st.floats(0.01, 1.0)
    cs = np.array(data.draw(st.lists(st.lists(values, min_size=L, max_size=L), min_size=n, max_size=n)))
    topic = data.draw(st.integers(0, n - 1))
    shared = np.array(data.draw(st.lists(st.booleans(), min_size=L, max_size=L)))
    if not shared.any():
        shared[0] = True
    limit, concepts.ENUMERATION_LIMIT = concepts.ENUMERATION_LIMIT, -1
    try:
        chosen = best_subset_mask(cs, topic, shared)
    finally:
        concepts.ENUMERATION_LIMIT = limit
    assert tuple(np.flatnonzero(chosen)) == brute_force_subset(cs, topic, np.flatnonzero(shared))
