"""Offline split of the energy budget into servicing and exploration energy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .world import Scenario

# independent substreams derived from one scenario seed
ALLOCATION_STREAM = 1
PLACEMENT_STREAM = 2


class InfeasibleBudget(ValueError):
    pass


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def draw_geometric_counts(rng: np.random.Generator, p: float, n: int) -> list[int]:
    """``n`` i.i.d. draws on {0, 1, 2, ...}: failures before the first success."""
    return [int(v) - 1 for v in rng.geometric(p, size=n)]


@dataclass(frozen=True)
class EnergyAllocation:
    E: int
    E_kappa: int
    E_eps: int
    N: int
    E_goal: int
    alphas: Mapping[str, int] = field(default_factory=dict)
    draws: int = 0
    global_bound: int = 0

    def to_json(self) -> dict:
        return {
            "E": self.E, "E_kappa": self.E_kappa, "E_eps": self.E_eps, "N": self.N,
            "E_goal": self.E_goal, "alphas": dict(self.alphas), "draws": self.draws,
            "global_bound": self.global_bound,
        }


def global_target_bound(E: int, energies: Mapping[str, int], targets: Iterable[str] | None = None) -> int:
    """Loose bound on serviceable targets: floor(E / cheapest servicing energy)."""
    keys = list(targets) if targets is not None else [k for k, v in energies.items() if v > 0]
    if not keys:
        raise ValueError("need at least one target")
    return E // min(energies[k] for k in keys)


def sample_energy_budget(scenario: Scenario, rng: np.random.Generator | None = None) -> EnergyAllocation:
    """Draw target frequencies until their servicing energy leaves room to reach the goal."""
    grid = scenario.grid
    E = scenario.budget
    E_goal = grid.shortest_energy(grid.init, grid.goal)
    if E <= E_goal:
        raise InfeasibleBudget(f"budget {E} leaves nothing beyond the {E_goal} needed to reach the goal")
    if rng is None:
        rng = stream(scenario.seed, ALLOCATION_STREAM)
    targets = scenario.targets
    e = scenario.energies
    p = float(scenario.geometric_p)
    E_kappa = E
    alphas: dict[str, int] = {}
    draws = 0
    while E_kappa >= E - E_goal:
        counts = draw_geometric_counts(rng, p, len(targets))
        alphas = dict(zip(targets, counts))
        E_kappa = sum(a * e[t] for t, a in alphas.items())
        draws += 1
    min_e = min(e[t] for t in targets)
    return EnergyAllocation(
        E=E, E_kappa=E_kappa, E_eps=E - E_kappa, N=E_kappa // min_e, E_goal=E_goal,
        alphas=alphas, draws=draws, global_bound=global_target_bound(E, e, targets),
    )
