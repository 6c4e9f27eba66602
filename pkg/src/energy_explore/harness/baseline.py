"""Full-information baseline: best servicing plan when every label is known up front."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction

from ..world import Cell, Scenario, neighbors

DEFAULT_STATE_LIMIT = 2_000_000


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass
class BaselineResult:
    reward: Fraction
    path: list[Cell]
    serviced: list[Cell] = field(default_factory=list)
    energy_used: int = 0
    states: int = 0
    optimal: bool = True


def _energy_to_goal(sc: Scenario) -> dict[Cell, int]:
    grid = sc.grid
    return {c: grid.shortest_energy(c, grid.goal) for c in grid.cells()}


def full_info_baseline(sc: Scenario, state_limit: int = DEFAULT_STATE_LIMIT) -> BaselineResult:
    """Exact optimum over (cell, remaining total energy, serviced set).

    The whole budget E is shared by motion and servicing. The run may end on
    any visit to the goal; servicing is optional and at most once per cell.
    """
    grid = sc.grid
    planted = [(c, s) for c, s in sc.planted if s in sc.targets]
    bit = {c: 1 << i for i, (c, _) in enumerate(planted)}
    sym = dict(planted)
    to_goal = _energy_to_goal(sc)
    nbrs = {c: sorted(neighbors(grid, c)) for c in grid.cells()}
    memo: dict[tuple[Cell, int, int], tuple[Fraction, tuple | None] | None] = {}

    def value(x: Cell, e: int, mask: int):
        key = (x, e, mask)
        if key in memo:
            return memo[key]
        if len(memo) >= state_limit:
            raise SearchBudgetExceeded(f"more than {state_limit} baseline states")
        best = (Fraction(0), None) if x == grid.goal else None
        b = bit.get(x, 0)
        if b and not mask & b:
            cost = sc.energies[sym[x]]
            if e - cost >= to_goal[x]:
                sub = value(x, e - cost, mask | b)
                if sub is not None:
                    v = sub[0] + sc.rewards[sym[x]]
                    if best is None or v > best[0]:
                        best = (v, ("service", x, e - cost, mask | b))
        for y in nbrs[x]:
            e2 = e - grid.weight(x, y)
            if e2 < to_goal[y]:
                continue
            sub = value(y, e2, mask)
            if sub is not None and (best is None or sub[0] > best[0]):
                best = (sub[0], ("move", y, e2, mask))
        memo[key] = best
        return best

    init = Cell(*grid.init)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * (sc.budget + len(planted)) + 1000))
    try:
        root = value(init, sc.budget, 0)
    finally:
        sys.setrecursionlimit(limit)
    if root is None:
        raise ValueError("goal unreachable within the budget")

    path = [init]
    serviced = []
    state = (init, sc.budget, 0)
    while True:
        _, nxt = memo[state]
        if nxt is None:
            break
        kind, x, e, mask = nxt
        if kind == "service":
            serviced.append(x)
        else:
            path.append(x)
        state = (x, e, mask)
    return BaselineResult(
        reward=root[0], path=path, serviced=serviced,
        energy_used=sc.budget - state[1], states=len(memo),
    )
