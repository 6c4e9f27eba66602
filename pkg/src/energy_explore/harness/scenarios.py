"""Random target placements drawn from a template scenario."""

from __future__ import annotations

import numpy as np

from ..budget import PLACEMENT_STREAM, draw_geometric_counts, stream
from ..world import Scenario

MAX_REDRAWS = 10_000


def case_seed(seed: int, case: int) -> int:
    """Per-case seed, used for the planner's own randomness in that case."""
    ss = np.random.SeedSequence(seed, spawn_key=(PLACEMENT_STREAM, case))
    return int(ss.generate_state(1, np.uint64)[0])


def draw_counts(template: Scenario, seed: int, case: int, nu: int | None = None) -> tuple[dict[str, int], np.random.Generator]:
    """Geometric per-type counts for one case; redraws on fresh substreams until they fit."""
    grid = template.grid
    n_free = grid.n_cells - 2
    p = float(template.geometric_p)
    if nu is not None and not 0 <= nu <= n_free:
        raise ValueError(f"cannot plant {nu} targets in {n_free} free cells")
    for attempt in range(MAX_REDRAWS):
        rng = stream(seed, PLACEMENT_STREAM, case, attempt)
        counts = draw_geometric_counts(rng, p, len(template.targets))
        total = sum(counts)
        if total > n_free or (nu is not None and total != nu):
            continue
        return dict(zip(template.targets, counts)), rng
    raise ValueError(f"no admissible target counts after {MAX_REDRAWS} draws")


def generate_scenarios(template: Scenario, cases: int, seed: int, nu: int | None = None) -> list[Scenario]:
    """``cases`` scenarios sharing the template; targets go to the first cells of a shuffle.

    With ``nu`` given, draws are rejected until the per-type counts sum to it.
    """
    if template.placement != "random":
        raise ValueError("template must use a random placement")
    grid = template.grid
    free = [c for c in grid.cells() if c != grid.init and c != grid.goal]
    out = []
    for i in range(cases):
        counts, rng = draw_counts(template, seed, i, nu)
        order = rng.permutation(len(free))
        symbols = [t for t in template.targets for _ in range(counts[t])]
        planted = [(free[j], s) for j, s in zip(order, symbols)]
        out.append(template.with_planted(planted, seed=case_seed(seed, i)))
    return out
