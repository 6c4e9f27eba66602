"""Product DAG of grid motion and remaining exploration energy."""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .world import Cell, GridTS, neighbors


class InvariantViolation(RuntimeError):
    """Internal state that a valid scenario can never produce."""


class ProductNode(NamedTuple):
    cell: Cell
    energy: int


def _topo_key(n: ProductNode) -> tuple[int, int, int]:
    # energy strictly drops along every edge, so descending energy is topological
    return (-n.energy, n.cell.row, n.cell.col)


class ProductGraph:
    """Immutable DAG over (cell, remaining energy) with dense topological numbering.

    Every node whose cell is the goal is final and has an implicit edge to a
    virtual sink; ``n_edges`` counts product transitions only.
    """

    def __init__(
        self,
        nodes: Iterable[ProductNode],
        edges: Iterable[tuple[ProductNode, ProductNode]],
        initial: ProductNode,
        goal: Cell,
        width: int,
    ):
        ordered = sorted(set(nodes), key=_topo_key)
        self.nodes: list[ProductNode] = ordered
        self.index = {n: i for i, n in enumerate(ordered)}
        succ: list[list[int]] = [[] for _ in ordered]
        pred: list[list[int]] = [[] for _ in ordered]
        for a, b in set(edges):
            ia, ib = self.index[a], self.index[b]
            succ[ia].append(ib)
            pred[ib].append(ia)
        self.succ = [tuple(sorted(s)) for s in succ]
        self.pred = [tuple(sorted(p)) for p in pred]
        self.goal = goal
        self.width = width
        self.initial = self.index[initial]
        self.final = tuple(i for i, n in enumerate(ordered) if n.cell == goal)
        self.is_final = [n.cell == goal for n in ordered]
        self.node_cell = [n.cell.row * width + n.cell.col for n in ordered]
        self._coreach: list[bool] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    @property
    def source(self) -> ProductNode:
        return self.nodes[self.initial]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, vs in enumerate(self.succ) for v in vs]

    def coreachable(self) -> list[bool]:
        """Nodes from which some final node can be reached."""
        if self._coreach is None:
            ok = list(self.is_final)
            for u in range(len(self.nodes) - 1, -1, -1):
                if not ok[u] and any(ok[v] for v in self.succ[u]):
                    ok[u] = True
            self._coreach = ok
        return self._coreach

    def reachable_from(self, start: int) -> list[bool]:
        seen = [False] * len(self.nodes)
        seen[start] = True
        for u in range(start, len(self.nodes)):
            if seen[u]:
                for v in self.succ[u]:
                    seen[v] = True
        return seen

    def subgraph(self, keep: list[bool], initial: int) -> ProductGraph:
        nodes = [n for n, k in zip(self.nodes, keep) if k]
        edges = [
            (self.nodes[u], self.nodes[v])
            for u in range(len(self.nodes)) if keep[u]
            for v in self.succ[u] if keep[v]
        ]
        return ProductGraph(nodes, edges, self.nodes[initial], self.goal, self.width)

    def to_dot(self) -> str:
        lines = ["digraph product {", '  rankdir=LR;', '  sink [shape=doublecircle,label="t"];']
        for i, n in enumerate(self.nodes):
            shape = "box" if self.is_final[i] else "ellipse"
            style = ",style=bold" if i == self.initial else ""
            lines.append(f'  n{i} [shape={shape}{style},label="({n.cell.row},{n.cell.col}) e={n.energy}"];')
        for u, v in self.edges():
            lines.append(f"  n{u} -> n{v};")
        for f in self.final:
            lines.append(f"  n{f} -> sink [style=dashed];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def construct_product_dag(grid: GridTS, E_eps: int, prune_dead_ends: bool = False) -> ProductGraph:
    """Stack expansion from (x_init, E_eps) over every energy-feasible grid transition."""
    start = ProductNode(Cell(*grid.init), E_eps)
    nodes = {start}
    edges = set()
    final = set()
    stack = [start]
    while stack:
        x, e = stack.pop()
        for y in sorted(neighbors(grid, x)):
            e2 = e - grid.weight(x, y)
            if e2 < 0:
                continue
            nxt = ProductNode(y, e2)
            if nxt not in nodes:
                nodes.add(nxt)
                stack.append(nxt)
                if y == grid.goal:
                    final.add(nxt)
            edges.add((ProductNode(x, e), nxt))
    if not final:
        raise ValueError(f"exploration energy {E_eps} cannot reach the goal {tuple(grid.goal)}")
    g = ProductGraph(nodes, edges, start, Cell(*grid.goal), grid.width)
    if prune_dead_ends:
        g = prune(g, start)
    return g


def prune(g: ProductGraph, current: ProductNode | int) -> ProductGraph:
    """Keep nodes reachable from ``current`` that can still reach a final node."""
    cur = current if isinstance(current, int) else g.index.get(current)
    if cur is None:
        raise InvariantViolation(f"{current} is not a node of the product graph")
    co = g.coreachable()
    if not co[cur]:
        raise InvariantViolation(f"{g.nodes[cur]} cannot reach the goal")
    fwd = g.reachable_from(cur)
    keep = [a and b for a, b in zip(fwd, co)]
    return g.subgraph(keep, cur)
