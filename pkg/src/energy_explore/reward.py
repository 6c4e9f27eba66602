"""Per-cell reward design and the discounted max-over-observers collection rule."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .tracking import KnowledgeMap, expected_target_reward, targets_below
from .world import Cell, Scenario, manhattan

EXPECTED = "expected"
VISITED = "visited"
EXPLORED = "explored"
UNOBSERVED = "unobserved"

VISITED_PENALTY = Fraction(-1)


@dataclass(frozen=True)
class RewardField:
    width: int
    height: int
    values: tuple[Fraction, ...]
    cases: tuple[str, ...]

    def __getitem__(self, cell: tuple[int, int]) -> Fraction:
        return self.values[cell[0] * self.width + cell[1]]

    def case(self, cell: tuple[int, int]) -> str:
        return self.cases[cell[0] * self.width + cell[1]]

    def floats(self) -> list[float]:
        return [float(v) for v in self.values]

    @classmethod
    def from_values(cls, width: int, height: int, values: Sequence) -> RewardField:
        """Field with arbitrary values; negatives are tagged visited, the rest expected."""
        vals = tuple(Fraction(v) for v in values)
        if len(vals) != width * height:
            raise ValueError("one value per cell required")
        return cls(width, height, vals, tuple(VISITED if v < 0 else EXPECTED for v in vals))

    def to_csv(self) -> str:
        rows = []
        for r in range(self.height):
            rows.append(",".join(repr(float(v)) for v in self.values[r * self.width:(r + 1) * self.width]))
        return "\n".join(rows) + "\n"


def unobserved_value(n_rem: int, scenario: Scenario, n_unobserved: int) -> Fraction:
    if n_unobserved == 0:
        return Fraction(0)
    total = sum((scenario.rewards[t] for t in scenario.targets), Fraction(0))
    return Fraction(max(n_rem, 0)) * total / (n_unobserved * len(scenario.targets))


def compute_reward_field(
    k: KnowledgeMap, visited: Iterable[tuple[int, int]], n_rem: int, scenario: Scenario
) -> RewardField:
    """Assign each cell one of four cases, first match wins: visited, expected, explored, unobserved."""
    if n_rem < 0:
        raise ValueError("remaining target estimate must be non-negative")
    ref = k.refinement
    visited_idx = {c[0] * k.width + c[1] for c in visited}
    n = k.width * k.height
    n_unobs = n - k.n_observed()
    uniform = unobserved_value(n_rem, scenario, n_unobs)
    values = []
    cases = []
    cache: dict[str, Fraction] = {}
    for i in range(n):
        m = k.at_index(i)
        if i in visited_idx:
            values.append(VISITED_PENALTY)
            cases.append(VISITED)
        elif m == ref.root:
            values.append(uniform)
            cases.append(UNOBSERVED)
        elif targets_below(ref, m, scenario.targets):
            if m not in cache:
                cache[m] = expected_target_reward(ref, m, scenario.targets, scenario.rewards)
            values.append(cache[m])
            cases.append(EXPECTED)
        else:
            values.append(scenario.r_epsilon)
            cases.append(EXPLORED)
    return RewardField(k.width, k.height, tuple(values), tuple(cases))


def observation_reward(field: RewardField, observer: tuple[int, int], observed: tuple[int, int], lam, D: int):
    """Reward for seeing ``observed`` from ``observer``: lam**d times its cell reward, 0 beyond D."""
    d = manhattan(observer, observed)
    if d > D:
        return 0 * lam
    return lam**d * field[observed]


def path_collected_reward(field: RewardField, path: Sequence[tuple[int, int]], lam, D: int):
    """Sum over cells of the best observation reward any path cell earns for it."""
    for a, b in zip(path, path[1:]):
        if manhattan(a, b) != 1:
            raise ValueError(f"path cells {tuple(a)} and {tuple(b)} are not adjacent")
    best: dict[Cell, object] = {}
    for x in dict.fromkeys(Cell(*p) for p in path):
        r0, c0 = x
        for r in range(max(0, r0 - D), min(field.height, r0 + D + 1)):
            span = D - abs(r - r0)
            for c in range(max(0, c0 - span), min(field.width, c0 + span + 1)):
                v = observation_reward(field, x, (r, c), lam, D)
                key = Cell(r, c)
                if key not in best or v > best[key]:
                    best[key] = v
    return sum(best.values(), 0 * lam)
