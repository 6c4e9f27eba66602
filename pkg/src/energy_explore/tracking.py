"""Per-cell symbolic knowledge tracking and target-probability queries."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .world import Cell, RefinementSpec, manhattan


class InconsistentObservation(RuntimeError):
    """An observation contradicts accumulated knowledge (world/refinement bug)."""


@dataclass(frozen=True)
class TrackingUpdate:
    cell: Cell
    before: str
    after: str
    distance: int

    def to_json(self) -> dict:
        return {"cell": list(self.cell), "before": self.before, "after": self.after, "u": self.distance}


class KnowledgeMap:
    """Current tracking state m(x) for every cell; starts at the root everywhere."""

    def __init__(self, width: int, height: int, refinement: RefinementSpec):
        self.width = width
        self.height = height
        self.refinement = refinement
        self._m = [refinement.root] * (width * height)

    def __getitem__(self, cell: tuple[int, int]) -> str:
        return self._m[cell[0] * self.width + cell[1]]

    def at_index(self, idx: int) -> str:
        return self._m[idx]

    def layer(self, cell: tuple[int, int]) -> int:
        return self.refinement.layer(self[cell])

    def observed(self) -> set[Cell]:
        root = self.refinement.root
        return {Cell(*divmod(i, self.width)) for i, s in enumerate(self._m) if s != root}

    def n_observed(self) -> int:
        root = self.refinement.root
        return sum(1 for s in self._m if s != root)

    def snapshot(self) -> tuple[str, ...]:
        return tuple(self._m)

    def _set(self, cell: tuple[int, int], symbol: str) -> None:
        self._m[cell[0] * self.width + cell[1]] = symbol


def update_knowledge(
    k: KnowledgeMap, robot: tuple[int, int], observations: Mapping[Cell, str]
) -> list[TrackingUpdate]:
    """Apply one batch of observations; returns the strict refinements only.

    A cell seen at distance u moves to the observed symbol when u is below the
    layer of its current state, otherwise it self-loops.
    """
    ref = k.refinement
    updates = []
    for x in sorted(observations):
        seen = observations[x]
        u = manhattan(robot, x)
        if ref.layer(seen) != u:
            raise InconsistentObservation(f"symbol {seen!r} for {tuple(x)} is not a layer-{u} symbol")
        cur = k[x]
        if not ref.is_descendant(seen, cur) and not ref.is_descendant(cur, seen):
            raise InconsistentObservation(
                f"cell {tuple(x)}: observed {seen!r} is unrelated to known {cur!r}"
            )
        if u < ref.layer(cur):
            if not ref.is_descendant(seen, cur):
                raise InconsistentObservation(f"cell {tuple(x)}: {seen!r} does not refine {cur!r}")
            k._set(x, seen)
            updates.append(TrackingUpdate(Cell(*x), cur, seen, u))
    return updates


def targets_below(refinement: RefinementSpec, m: str, targets: Iterable[str]) -> set[str]:
    return {t for t in targets if refinement.is_descendant(t, m)}


def prob_of_target(refinement: RefinementSpec, m: str, target: str) -> Fraction:
    """Sum over all refinement paths m -> target of the product of priors along the path."""
    memo = refinement._memo
    key = ("p", m, target)
    if key in memo:
        return memo[key]
    if m == target:
        out = Fraction(1)
    elif refinement.layer(m) <= refinement.layer(target):
        out = Fraction(0)
    else:
        out = sum(
            (p * prob_of_target(refinement, child, target)
             for child, p in refinement.priors.get(m, {}).items()),
            Fraction(0),
        )
    memo[key] = out
    return out


def expected_target_reward(
    refinement: RefinementSpec, m: str, targets: Iterable[str], rewards: Mapping[str, Fraction]
) -> Fraction:
    return sum(
        (prob_of_target(refinement, m, t) * rewards[t] for t in sorted(targets_below(refinement, m, targets))),
        Fraction(0),
    )
