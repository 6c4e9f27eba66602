from __future__ import annotations

import copy
import os
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from energy_explore.reward import RewardField
from energy_explore.world import load_scenario, mars_document

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def sar_document() -> dict:
    """Search-and-rescue refinement with one incremental layer (D=1)."""
    return {
        "grid": {"width": 4, "height": 4, "init": [0, 0], "goal": [3, 3], "weights": "unit"},
        "symbols": {
            "root": "ROOT",
            "empty": "Empty",
            "layers": [
                ["Class_A_Fire", "Class_B_Fire", "Severely_Injured_Victim", "Mildly_Injured_Victim", "Empty"],
                ["Fire", "Victim", "Other"],
            ],
            "parents": {
                "Class_A_Fire": "Fire", "Class_B_Fire": "Fire",
                "Severely_Injured_Victim": "Victim", "Mildly_Injured_Victim": "Victim",
                "Empty": "Other", "Fire": "ROOT", "Victim": "ROOT", "Other": "ROOT",
            },
            "priors": {
                "ROOT": {"Fire": "0.3", "Victim": "0.2", "Other": "0.5"},
                "Fire": {"Class_A_Fire": "0.6", "Class_B_Fire": "0.4"},
                "Victim": {"Severely_Injured_Victim": "0.5", "Mildly_Injured_Victim": "0.5"},
                "Other": {"Empty": "1"},
            },
        },
        "targets": {
            "list": ["Class_A_Fire", "Severely_Injured_Victim"],
            "rewards": {"Class_A_Fire": "8", "Severely_Injured_Victim": "6"},
            "energies": {"Class_A_Fire": 3, "Severely_Injured_Victim": 2},
            "placement": [],
        },
        "budget": {"E": 10},
        "perception": {"D": 1},
        "planner": {"lambda": "0.5"},
        "seed": 1,
    }


def mars_variant(width: int, height: int, goal, E: int, placement=(), init=(0, 0), seed: int = 0) -> dict:
    doc = mars_document()
    doc["grid"].update(width=width, height=height, init=list(init), goal=list(goal))
    doc["targets"]["placement"] = (
        placement if placement == "random"
        else [{"cell": list(c), "symbol": s} for c, s in placement]
    )
    doc["budget"]["E"] = E
    doc["seed"] = seed
    return doc


def random_field(rng: random.Random, width: int, height: int, p_neg: float = 0.2) -> RewardField:
    """Mixed-sign rational field: visited-style -1 cells and small positive values."""
    vals = []
    for _ in range(width * height):
        if rng.random() < p_neg:
            vals.append(Fraction(-1))
        else:
            vals.append(Fraction(rng.randint(0, 40), 8))
    return RewardField.from_values(width, height, vals)


@pytest.fixture
def mars():
    return load_scenario(mars_document())


@pytest.fixture
def sar():
    return load_scenario(sar_document())


@pytest.fixture
def doc_copy():
    return copy.deepcopy


def random_refinement(rng: random.Random, max_layers: int = 4, max_symbols: int = 32):
    """Random tree-shaped refinement with rational, row-normalised priors."""
    while True:
        ref = _random_refinement_once(rng, max_layers)
        if len(ref.symbols) <= max_symbols:
            return ref


def _random_refinement_once(rng: random.Random, max_layers: int):
    from energy_explore.world import RefinementSpec

    n_layers = rng.randint(1, max_layers)
    layers: list[list[str]] = [[] for _ in range(n_layers)]
    parent: dict[str, str] = {}
    priors: dict[str, dict[str, Fraction]] = {}
    def spawn(owner: str, layer: int) -> None:
        k = rng.randint(1, 3)
        kids = []
        for _ in range(k):
            name = f"s{layer}_{len(layers[layer])}"
            layers[layer].append(name)
            parent[name] = owner
            kids.append(name)
        weights = [rng.randint(1, 9) for _ in kids]
        total = sum(weights)
        priors[owner] = {c: Fraction(w, total) for c, w in zip(kids, weights)}
        if layer > 0:
            for c in kids:
                spawn(c, layer - 1)

    spawn("ROOT", n_layers - 1)
    return RefinementSpec(tuple(tuple(l) for l in layers), priors, parent, root="ROOT", empty=layers[0][0])


def leaf_distribution(ref, m: str) -> dict[str, Fraction]:
    """Oracle: enumerate every refinement outcome below ``m`` with its chain probability."""
    out: dict[str, Fraction] = {}
    stack = [(m, Fraction(1))]
    while stack:
        s, p = stack.pop()
        row = ref.priors.get(s)
        if not row:
            out[s] = out.get(s, Fraction(0)) + p
            continue
        for child, q in row.items():
            stack.append((child, p * q))
    return out


def oracle_expected_reward(ref, m: str, targets, rewards) -> Fraction:
    dist = leaf_distribution(ref, m)
    return sum((p * rewards[s] for s, p in dist.items() if s in targets), Fraction(0))


def check_trace(trace, sc) -> None:
    """Every invariant a finished run must satisfy."""
    ref = sc.refinement
    alloc = trace.header["allocation"]
    moves = [e for e in trace.events if e["kind"] == "move"]
    assert tuple(moves[0]["cell"]) == tuple(sc.grid.init)
    assert tuple(moves[-1]["cell"]) == tuple(sc.grid.goal)
    assert moves[0]["E_eps"] == alloc["E_eps"]
    for a, b in zip(moves, moves[1:]):
        assert b["E_eps"] == a["E_eps"] - sc.grid.weight(a["cell"], b["cell"])
        assert b["E_eps"] >= 0
    E_kappa = alloc["E_kappa"]
    total = Fraction(0)
    layer = {}
    phase = {}
    for e in trace.events:
        if e["kind"] == "service":
            cost = sc.energies[e["symbol"]]
            assert cost <= E_kappa
            assert e["E_kappa"] == E_kappa - cost >= 0
            E_kappa = e["E_kappa"]
            total += Fraction(e["reward"])
            assert sc.label(e["cell"]) == e["symbol"]
        elif e["kind"] == "knowledge":
            phase[e["step"]] = "knowledge"
            for u in e["updates"]:
                c = tuple(u["cell"])
                before = layer.get(c, ref.layer(ref.root))
                assert ref.layer(u["before"]) == before
                assert ref.layer(u["after"]) < before
                layer[c] = ref.layer(u["after"])
        elif e["kind"] == "plan":
            assert phase.get(e["step"]) == "knowledge"  # observe before planning
            assert tuple(e["path"][0]) == tuple(moves[e["step"]]["cell"])
            assert tuple(e["path"][-1]) == tuple(sc.grid.goal)
    foot = trace.footer
    assert foot is not None
    assert Fraction(foot["R_serv"]) == total
    assert foot["E_kappa"] == E_kappa >= 0
    assert len(foot["serviced"]) <= alloc["N"]
    assert len(set(map(tuple, foot["serviced"]))) == len(foot["serviced"])
    assert foot["consumed"] == (alloc["E_eps"] - moves[-1]["E_eps"]) + (alloc["E_kappa"] - E_kappa)
    assert foot["consumed"] <= sc.budget
    assert foot["steps"] == len(moves) - 1
