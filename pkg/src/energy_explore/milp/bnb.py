"""Exact depth-first branch-and-bound for the path model.

The search extends a partial source path one product edge at a time. A node's
optimistic bound is the reward collected so far plus the smaller of two
admissible estimates of what the remaining path can still add:

* per cell: the best discounted reward any reachable node could earn for it,
  minus what is already credited (backward DP over the DAG, once per model);
* per path: the longest path to the sink where each edge a->b is weighted by
  the positive-reward increase seen from b over a (also a backward DP).

Cells with negative reward only ever enter through the per-cell term.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..product import InvariantViolation, ProductNode
from ..world import Cell
from .model import SINK, MilpModel

NEG_INF = float("-inf")


@dataclass
class SolverConfig:
    node_limit: int | None = None
    time_limit: float | None = None
    tol: float = 1e-9


@dataclass
class SolverStats:
    bb_nodes: int = 0
    bounds_evaluated: int = 0
    pruned: int = 0
    # combinatorial search: no LP relaxations are solved
    lp_iterations: int = 0
    wall_ms: float = 0.0

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "bb_nodes": self.bb_nodes, "bounds_evaluated": self.bounds_evaluated,
            "pruned": self.pruned, "lp_iterations": self.lp_iterations,
        }
        if timing:
            out["wall_ms"] = self.wall_ms
        return out


@dataclass
class MilpSolution:
    objective: float
    node_path: list[int]
    product_path: list[ProductNode]
    grid_path: list[Cell]
    optimal: bool = True
    stats: SolverStats = field(default_factory=SolverStats)

    @property
    def edges(self) -> list[tuple[int, int]]:
        p = self.node_path
        return list(zip(p, p[1:])) + [(p[-1], SINK)]

    @property
    def next_cell(self) -> Cell:
        return self.grid_path[1]


class _Stop(Exception):
    pass


def make_solution(model: MilpModel, node_path: list[int], objective: float, optimal=True, stats=None) -> MilpSolution:
    g = model.graph
    prod = [g.nodes[u] for u in node_path]
    return MilpSolution(
        objective=objective, node_path=list(node_path), product_path=prod,
        grid_path=[n.cell for n in prod], optimal=optimal, stats=stats or SolverStats(),
    )


class PathSearch:
    """Search state over partial paths; public so tests can probe bound admissibility."""

    def __init__(self, model: MilpModel, config: SolverConfig | None = None):
        self.model = model
        self.config = config or SolverConfig()
        g = model.graph
        X = model.n_cells
        vals = np.array(model.values, dtype=float)
        self.pos = (vals > 0).astype(float)
        self.neg = (vals < 0).astype(float)
        sees: list[list[tuple[int, float]]] = [[] for _ in range(X)]
        own = np.full((X, X), NEG_INF)
        for c, lst in enumerate(model.observers):
            for xo, rho in lst:
                sees[xo].append((c, rho))
                own[xo, c] = rho
        self.sees = [sorted(s) for s in sees]
        self.cell_of = g.node_cell
        self.succ = g.succ
        self.is_final = g.is_final

        n = len(g)
        best = np.empty((n, X))
        for u in range(n - 1, -1, -1):
            row = own[g.node_cell[u]].copy()
            for v in g.succ[u]:
                np.maximum(row, best[v], out=row)
            best[u] = row
        self.best = best

        seen_pos = np.where(np.isfinite(own), own, 0.0) * self.pos
        gain_cache: dict[tuple[int, int], float] = {}
        lp = [NEG_INF] * n
        for u in range(n - 1, -1, -1):
            a = g.node_cell[u]
            acc = 0.0 if g.is_final[u] else NEG_INF
            for v in g.succ[u]:
                b = g.node_cell[v]
                key = (a, b)
                if key not in gain_cache:
                    gain_cache[key] = float(np.maximum(seen_pos[b] - seen_pos[a], 0.0).sum())
                acc = max(acc, gain_cache[key] + lp[v])
            lp[u] = acc
        self.lp = lp

        self.init_base = np.where(vals < 0, np.inf, 0.0)
        self.reset()

    def reset(self) -> None:
        X = self.model.n_cells
        self.val = [NEG_INF] * X
        self.base = self.init_base.copy()
        self.total = 0.0
        self.tmp = np.empty(X)
        self.path: list[int] = []

    def apply(self, u: int) -> list[tuple[int, float]]:
        """Extend the path by node ``u``; returns the undo log."""
        val = self.val
        base = self.base
        t = self.total
        undo = []
        for c, r in self.sees[self.cell_of[u]]:
            old = val[c]
            if r > old:
                undo.append((c, old))
                t += r - (old if old != NEG_INF else 0.0)
                val[c] = r
                base[c] = r
        self.total = t
        self.path.append(u)
        return undo

    def revert(self, undo: list[tuple[int, float]], total: float) -> None:
        val = self.val
        base = self.base
        for c, old in reversed(undo):
            val[c] = old
            base[c] = old if old != NEG_INF else self.init_base[c]
        self.total = total
        self.path.pop()

    def bound(self, u: int) -> float:
        """Optimistic extra reward for completions of the current path, which ends at ``u``."""
        tmp = self.tmp
        np.subtract(self.best[u], self.base, out=tmp)
        np.maximum(tmp, 0.0, out=tmp)
        a_pos = float(tmp.dot(self.pos))
        a_neg = float(tmp.dot(self.neg))
        return a_neg + min(a_pos, self.lp[u])

    def exact_total(self) -> float:
        return math.fsum(v for v in self.val if v != NEG_INF)


def solve(model: MilpModel, config: SolverConfig | None = None) -> MilpSolution:
    """Exact optimum of the path model by depth-first branch-and-bound."""
    config = config or SolverConfig()
    g = model.graph
    if len(g) == 0 or not g.final:
        raise InvariantViolation("infeasible model: empty pruned product graph")
    t0 = time.perf_counter()
    s = PathSearch(model, config)
    stats = SolverStats()
    tol = config.tol
    deadline = None if config.time_limit is None else t0 + config.time_limit
    node_limit = config.node_limit
    state = {"best": NEG_INF, "path": None}
    succ = s.succ
    is_final = s.is_final

    def dfs(u: int) -> None:
        stats.bb_nodes += 1
        if node_limit is not None and stats.bb_nodes > node_limit:
            raise _Stop
        if deadline is not None and stats.bb_nodes & 1023 == 0 and time.perf_counter() > deadline:
            raise _Stop
        if is_final[u] and s.total > state["best"] + tol:
            state["best"] = s.total
            state["path"] = list(s.path)
        kids = []
        here = s.total
        for v in succ[u]:
            undo = s.apply(v)
            ub = s.total + s.bound(v)
            stats.bounds_evaluated += 1
            s.revert(undo, here)
            if ub > state["best"] + tol:
                kids.append((-ub, v))
            else:
                stats.pruned += 1
        kids.sort()
        for neg_ub, v in kids:
            if -neg_ub <= state["best"] + tol:
                stats.pruned += 1
                continue
            undo = s.apply(v)
            dfs(v)
            s.revert(undo, here)

    s.apply(g.initial)
    optimal = True
    try:
        dfs(g.initial)
    except _Stop:
        optimal = False
    stats.wall_ms = (time.perf_counter() - t0) * 1000.0
    if state["path"] is None:
        # stopped before any incumbent: fall back to the lowest-index goal-reaching path
        state["path"] = _first_path(g)
    # recompute the incumbent's value without accumulated rounding
    s.reset()
    for u in state["path"]:
        s.apply(u)
    return make_solution(model, state["path"], s.exact_total(), optimal, stats)


def _first_path(g) -> list[int]:
    co = g.coreachable()
    if not co[g.initial]:
        raise InvariantViolation("source cannot reach the goal")
    path = [g.initial]
    while not g.is_final[path[-1]]:
        path.append(next(v for v in g.succ[path[-1]] if co[v]))
    return path


def assignment(model: MilpModel, node_path: list[int]) -> list[float]:
    """Full variable vector realising ``node_path`` with the best observer selected per cell."""
    x = [0.0] * len(model.variables)
    for a, b in zip(node_path, node_path[1:]):
        x[model.zeta[(a, b)]] = 1.0
    x[model.zeta[(node_path[-1], SINK)]] = 1.0
    for u in node_path:
        x[model.z[u]] = 1.0
    x[model.z[SINK]] = 1.0
    visited = {model.graph.node_cell[u] for u in node_path}
    for c in visited:
        x[model.y[c]] = 1.0
    for c in range(model.n_cells):
        cands = [(rho, xo) for xo, rho in model.observers[c] if xo in visited]
        if cands:
            rho, xo = max(cands, key=lambda p: (p[0], -p[1]))
            x[model.sig[(c, xo)]] = 1.0
            x[model.t[c]] = rho
        else:
            x[model.sig[(c, SINK)]] = 1.0
            x[model.t[c]] = 0.0
    return x
