"""Mixed-integer model of max-reward path selection on the pruned product graph.

Variables
    zeta  binary flow on every product edge and on every final-node -> sink edge
    z     binary node-visit indicator (one per product node plus the sink)
    y     cell-visit indicator in [0, 1]
    sig   binary choice of which visited cell is credited with observing a cell,
          including a null option worth nothing
    t     reward collected for a cell (free)

The per-cell max over observers is linearised without big-M: t_x is bounded by
the reward of the single selected observer, and an observer can only be
selected if it is visited. Cells with negative reward must pick a real observer
whenever any cell in range is visited, which reproduces the max over negative
terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..product import ProductGraph
from ..reward import RewardField
from ..world import Cell

SINK = -1

BINARY = "B"
CONTINUOUS = "C"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    name: str
    coefs: tuple[tuple[int, float], ...]
    sense: str  # "=", "<=", ">="
    rhs: float


@dataclass
class MilpModel:
    graph: ProductGraph
    field: RewardField
    lam: float
    D: int
    values: list[float]
    # observers[x] -> [(observer cell index, rho)] for cells in range of x
    observers: list[list[tuple[int, float]]]
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    zeta: dict[tuple[int, int], int] = field(default_factory=dict)
    z: dict[int, int] = field(default_factory=dict)
    y: list[int] = field(default_factory=list)
    sig: dict[tuple[int, int], int] = field(default_factory=dict)  # observer SINK means null
    t: list[int] = field(default_factory=list)

    @property
    def n_binary(self) -> int:
        return sum(1 for v in self.variables if v.kind == BINARY)

    @property
    def n_continuous(self) -> int:
        return sum(1 for v in self.variables if v.kind == CONTINUOUS)

    @property
    def n_cells(self) -> int:
        return self.field.width * self.field.height

    def cell(self, idx: int) -> Cell:
        return Cell(*divmod(idx, self.field.width))

    def _var(self, name: str, kind: str, lb: float, ub: float) -> int:
        self.variables.append(Variable(name, kind, lb, ub))
        return len(self.variables) - 1

    def _row(self, name: str, coefs, sense: str, rhs: float) -> None:
        self.constraints.append(Constraint(name, tuple(coefs), sense, float(rhs)))


def observer_table(field_: RewardField, lam: float, D: int) -> list[list[tuple[int, float]]]:
    """For every cell, the in-range cells that can observe it and the discounted reward they earn."""
    w, h = field_.width, field_.height
    vals = field_.floats()
    out = []
    for r0 in range(h):
        for c0 in range(w):
            rows = []
            for r in range(max(0, r0 - D), min(h, r0 + D + 1)):
                span = D - abs(r - r0)
                for c in range(max(0, c0 - span), min(w, c0 + span + 1)):
                    d = abs(r - r0) + abs(c - c0)
                    rows.append((r * w + c, lam**d * vals[r0 * w + c0]))
            out.append(rows)
    return out


def build_model(g: ProductGraph, current: tuple[int, int], field_: RewardField, lam, D: int) -> MilpModel:
    if len(g) == 0 or not g.final:
        raise ValueError("product graph is empty or has no final node")
    if tuple(g.source.cell) != tuple(current):
        raise ValueError(f"graph source {tuple(g.source.cell)} differs from current cell {tuple(current)}")
    lam = float(lam)
    m = MilpModel(g, field_, lam, D, field_.floats(), observer_table(field_, lam, D))
    w = field_.width
    cname = [f"{r}_{c}" for r in range(field_.height) for c in range(w)]

    for u, v in g.edges():
        m.zeta[(u, v)] = m._var(f"zeta_{u}_{v}", BINARY, 0, 1)
    for f in g.final:
        m.zeta[(f, SINK)] = m._var(f"zeta_{f}_sink", BINARY, 0, 1)
    for u in range(len(g)):
        m.z[u] = m._var(f"z_{u}", BINARY, 0, 1)
    m.z[SINK] = m._var("z_sink", BINARY, 0, 1)
    m.y = [m._var(f"y_{cname[x]}", CONTINUOUS, 0, 1) for x in range(m.n_cells)]

    # flow conservation: inflow - outflow = -1 at source, +1 at sink, 0 elsewhere
    for u in range(len(g)):
        coefs = [(m.zeta[(p, u)], 1.0) for p in g.pred[u]]
        coefs += [(m.zeta[(u, s)], -1.0) for s in g.succ[u]]
        if g.is_final[u]:
            coefs.append((m.zeta[(u, SINK)], -1.0))
        m._row(f"flow_{u}", coefs, "=", -1 if u == g.initial else 0)
    m._row("flow_sink", [(m.zeta[(f, SINK)], 1.0) for f in g.final], "=", 1)

    # node visits follow outflow (inflow for the sink)
    for u in range(len(g)):
        coefs = [(m.z[u], 1.0)] + [(m.zeta[(u, s)], -1.0) for s in g.succ[u]]
        if g.is_final[u]:
            coefs.append((m.zeta[(u, SINK)], -1.0))
        m._row(f"visit_{u}", coefs, "=", 0)
    m._row("visit_sink", [(m.z[SINK], 1.0)] + [(m.zeta[(f, SINK)], -1.0) for f in g.final], "=", 0)

    # cell visited iff one of its product nodes is
    nodes_of: list[list[int]] = [[] for _ in range(m.n_cells)]
    for u, x in enumerate(g.node_cell):
        nodes_of[x].append(u)
    for x in range(m.n_cells):
        m._row(f"cellub_{cname[x]}", [(m.y[x], 1.0)] + [(m.z[u], -1.0) for u in nodes_of[x]], "<=", 0)
        for u in nodes_of[x]:
            m._row(f"celllb_{cname[x]}_{u}", [(m.y[x], 1.0), (m.z[u], -1.0)], ">=", 0)

    # per-cell max over visited observers
    for x in range(m.n_cells):
        obs = m.observers[x]
        for xo, _ in obs:
            m.sig[(x, xo)] = m._var(f"sig_{cname[x]}_{cname[xo]}", BINARY, 0, 1)
        m.sig[(x, SINK)] = m._var(f"sig_{cname[x]}_null", BINARY, 0, 1)
    m.t = [m._var(f"t_{cname[x]}", CONTINUOUS, float("-inf"), float("inf")) for x in range(m.n_cells)]
    for x in range(m.n_cells):
        obs = m.observers[x]
        coefs = [(m.t[x], 1.0)] + [(m.sig[(x, xo)], -rho) for xo, rho in obs if rho != 0.0]
        m._row(f"collect_{cname[x]}", coefs, "<=", 0)
        m._row(
            f"choose_{cname[x]}",
            [(m.sig[(x, xo)], 1.0) for xo, _ in obs] + [(m.sig[(x, SINK)], 1.0)], "=", 1,
        )
        for xo, _ in obs:
            m._row(f"seen_{cname[x]}_{cname[xo]}", [(m.sig[(x, xo)], 1.0), (m.y[xo], -1.0)], "<=", 0)
        if m.values[x] < 0:
            real = [(m.sig[(x, xo)], 1.0) for xo, _ in obs]
            for xo, _ in obs:
                m._row(f"forced_{cname[x]}_{cname[xo]}", real + [(m.y[xo], -1.0)], ">=", 0)
        m.objective[m.t[x]] = 1.0
    return m
