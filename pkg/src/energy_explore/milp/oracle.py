"""Brute-force optimum by enumerating every source-to-sink path."""

from __future__ import annotations

from fractions import Fraction

from ..product import ProductGraph
from ..reward import RewardField, path_collected_reward
from ..world import as_fraction
from .bnb import MilpSolution, SolverStats

DEFAULT_PATH_LIMIT = 200_000


class PathExplosion(RuntimeError):
    pass


def iter_paths(g: ProductGraph, limit: int = DEFAULT_PATH_LIMIT):
    """Yield node paths from the source to every final node, lowest indices first."""
    count = 0
    stack = [(g.initial, [g.initial])]
    while stack:
        u, path = stack.pop()
        if g.is_final[u]:
            count += 1
            if count > limit:
                raise PathExplosion(f"more than {limit} source-to-sink paths")
            yield path
        for v in reversed(g.succ[u]):
            stack.append((v, path + [v]))


def oracle_solve(
    g: ProductGraph, current, field: RewardField, lam, D: int, limit: int = DEFAULT_PATH_LIMIT
) -> MilpSolution:
    """Exact (rational) maximum of the collected reward over all paths; tests and --verify only."""
    if tuple(g.source.cell) != tuple(current):
        raise ValueError("graph source differs from current cell")
    lam = as_fraction(lam)
    best: Fraction | None = None
    best_path: list[int] = []
    n = 0
    for path in iter_paths(g, limit):
        n += 1
        cells = [g.nodes[u].cell for u in path]
        v = path_collected_reward(field, cells, lam, D)
        if best is None or v > best:
            best, best_path = v, path
    prod = [g.nodes[u] for u in best_path]
    sol = MilpSolution(
        objective=float(best), node_path=best_path, product_path=prod,
        grid_path=[p.cell for p in prod], optimal=True, stats=SolverStats(bb_nodes=n),
    )
    sol.exact_objective = best
    return sol
