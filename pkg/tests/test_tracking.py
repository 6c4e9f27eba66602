from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from energy_explore.tracking import (
    InconsistentObservation, KnowledgeMap, expected_target_reward, prob_of_target, targets_below,
    update_knowledge,
)
from energy_explore.world import Cell, RefinementSpec, Sensor, load_scenario, observe

from conftest import leaf_distribution, mars_variant, oracle_expected_reward, random_refinement, sar_document

SAR_TARGETS = ("Class_A_Fire", "Severely_Injured_Victim")


def _chain_refinement() -> RefinementSpec:
    # ROOT -(1/2)-> Sample -(2/5)-> Fossil ; second target via Other -(1/5)-> Biomarker
    F = Fraction
    return RefinementSpec(
        layers=(("Fossil", "Rock", "Biomarker", "Sand"), ("Sample", "Other")),
        priors={
            "ROOT": {"Sample": F(1, 2), "Other": F(1, 2)},
            "Sample": {"Fossil": F(2, 5), "Rock": F(3, 5)},
            "Other": {"Biomarker": F(1, 5), "Sand": F(4, 5)},
        },
        parent={"Fossil": "Sample", "Rock": "Sample", "Biomarker": "Other", "Sand": "Other",
                "Sample": "ROOT", "Other": "ROOT"},
        empty="Sand",
    )


# --- knowledge updates ---------------------------------------------------------


def test_unobserved_cell_takes_layer1_observation(sar):
    k = KnowledgeMap(4, 4, sar.refinement)
    ups = update_knowledge(k, (1, 2), {Cell(1, 1): "Fire"})
    assert k[(1, 1)] == "Fire"
    assert [(u.before, u.after, u.distance) for u in ups] == [("ROOT", "Fire", 1)]


def test_self_loop_at_same_distance(sar):
    k = KnowledgeMap(4, 4, sar.refinement)
    update_knowledge(k, (0, 1), {Cell(0, 0): "Other"})
    assert update_knowledge(k, (1, 0), {Cell(0, 0): "Other"}) == []
    assert k[(0, 0)] == "Other"


def test_refines_to_ground_truth_when_adjacent():
    doc = sar_document()
    doc["targets"]["placement"] = [{"cell": [1, 1], "symbol": "Class_A_Fire"}]
    sc = load_scenario(doc)
    k = KnowledgeMap(4, 4, sc.refinement)
    update_knowledge(k, (1, 2), Sensor(sc).observe_all((1, 2)))
    assert k[(1, 1)] == "Fire"
    update_knowledge(k, (1, 1), Sensor(sc).observe_all((1, 1)))
    assert k[(1, 1)] == "Class_A_Fire"
    # a coarser view later never overwrites
    assert update_knowledge(k, (1, 2), Sensor(sc).observe_all((1, 2))) == []
    assert k[(1, 1)] == "Class_A_Fire"


def test_inconsistent_observations_raise(sar):
    k = KnowledgeMap(4, 4, sar.refinement)
    update_knowledge(k, (0, 1), {Cell(0, 0): "Fire"})
    with pytest.raises(InconsistentObservation):
        update_knowledge(k, (0, 0), {Cell(0, 0): "Empty"})
    with pytest.raises(InconsistentObservation):
        update_knowledge(k, (0, 2), {Cell(0, 2): "Fire"})  # wrong layer for distance 0


def test_knowledge_map_accessors(mars):
    k = KnowledgeMap(8, 8, mars.refinement)
    assert k.n_observed() == 0 and k.observed() == set()
    update_knowledge(k, (0, 0), Sensor(mars).observe_all((0, 0)))
    assert k.n_observed() == 6
    assert k.layer((0, 0)) == 0 and k.layer((1, 1)) == 2 and k.layer((5, 5)) == 3
    assert len(k.snapshot()) == 64


@given(st.integers(0, 10_000))
def test_random_walk_knowledge_monotone_and_consistent(seed):
    rng = random.Random(seed)
    w, h = rng.randint(3, 6), rng.randint(3, 6)
    cells = [(r, c) for r in range(h) for c in range(w) if (r, c) not in ((0, 0), (h - 1, w - 1))]
    symbols = ["Fossil", "Biomarker", "Mudstone", "Basalt", "Salt"]
    planted = [(c, rng.choice(symbols)) for c in rng.sample(cells, rng.randint(0, min(6, len(cells))))]
    sc = load_scenario(mars_variant(w, h, (h - 1, w - 1), E=w + h, placement=planted))
    ref = sc.refinement
    k = KnowledgeMap(w, h, ref)
    sensor = Sensor(sc)
    x = (0, 0)
    prev = [ref.layer(s) for s in k.snapshot()]
    for _ in range(25):
        update_knowledge(k, x, sensor.observe_all(x))
        layers = [ref.layer(s) for s in k.snapshot()]
        assert all(a <= b for a, b in zip(layers, prev))
        for i, m in enumerate(k.snapshot()):
            if m != ref.root:
                assert ref.is_descendant(sc.grid.labels[i], m)
        prev = layers
        r, c = x
        x = rng.choice([y for y in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1))
                        if 0 <= y[0] < h and 0 <= y[1] < w])


def test_unobserved_iff_root(mars):
    k = KnowledgeMap(8, 8, mars.refinement)
    update_knowledge(k, (3, 3), Sensor(mars).observe_all((3, 3)))
    for x in mars.grid.cells():
        seen = abs(x[0] - 3) + abs(x[1] - 3) <= 2
        assert (k[x] != "ROOT") == seen


# --- target queries ------------------------------------------------------------


def test_targets_below_examples(sar):
    ref = sar.refinement
    assert targets_below(ref, "Fire", SAR_TARGETS) == {"Class_A_Fire"}
    assert targets_below(ref, "Other", SAR_TARGETS) == set()
    assert targets_below(ref, "Class_A_Fire", SAR_TARGETS) == {"Class_A_Fire"}
    assert targets_below(ref, "ROOT", SAR_TARGETS) == set(SAR_TARGETS)


def test_prob_of_target_examples(sar):
    assert prob_of_target(sar.refinement, "Fire", "Class_A_Fire") == Fraction(3, 5)
    assert prob_of_target(sar.refinement, "Other", "Class_A_Fire") == 0
    ref = _chain_refinement()
    assert prob_of_target(ref, "ROOT", "Fossil") == Fraction(1, 5)


def test_expected_target_reward_examples(sar):
    F = Fraction
    assert expected_target_reward(sar.refinement, "Fire", SAR_TARGETS, sar.rewards) == F(24, 5)  # 4.8
    assert expected_target_reward(sar.refinement, "Other", SAR_TARGETS, sar.rewards) == 0
    ref = _chain_refinement()
    # chains 0.2 and 0.1 with rewards 8 and 6
    assert expected_target_reward(ref, "ROOT", ("Fossil", "Biomarker"), {"Fossil": 8, "Biomarker": 6}) == F(11, 5)


def test_expected_reward_matches_leaf_oracle_mars(mars):
    ref = mars.refinement
    for m in ref.symbols + (ref.root,):
        got = expected_target_reward(ref, m, mars.targets, mars.rewards)
        assert got == oracle_expected_reward(ref, m, mars.targets, mars.rewards)


@given(st.integers(0, 2**32))
def test_random_trees_expected_reward_exact(seed):
    rng = random.Random(seed)
    ref = random_refinement(rng)
    leaves = ref.layers[0]
    targets = tuple(s for s in leaves if s != ref.empty and rng.random() < 0.6)
    rewards = {t: Fraction(rng.randint(1, 20), rng.randint(1, 4)) for t in targets}
    for m in ref.symbols + (ref.root,):
        dist = leaf_distribution(ref, m)
        assert sum(dist.values()) == 1
        assert expected_target_reward(ref, m, targets, rewards) == oracle_expected_reward(ref, m, targets, rewards)
        for leaf in leaves:
            assert prob_of_target(ref, m, leaf) == dist.get(leaf, 0)
