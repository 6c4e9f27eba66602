"""First-step model size and solve time across grid sizes."""

from __future__ import annotations

import copy
import csv
import io
import time
from dataclasses import dataclass, field
from typing import Any, Iterable

from ..milp import SolverConfig, build_model, solve
from ..product import construct_product_dag, prune
from ..reward import compute_reward_field
from ..tracking import KnowledgeMap, update_knowledge
from ..world import Sensor, load_scenario, mars_document

# grid side and exploration energy of each default row
DEFAULT_SIZES = ((4, 11), (5, 13), (6, 16), (7, 18), (8, 20))


@dataclass
class BenchRow:
    grid: str
    E_eps: int
    nodes: int
    edges: int
    continuous: int
    binary: int
    constraints: int
    objective: float
    optimal: bool
    bb_nodes: int
    build_s: float
    solve_s: float


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    COLUMNS = ("Grid Size", "E_eps", "|V_eps|", "|Xi_eps|", "Continuous", "Binary", "Constraints",
               "Objective", "Optimal", "BB nodes")
    TIME_COLUMNS = ("Build (s)", "Time (s)")

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS + (self.TIME_COLUMNS if timing else ()))
        for r in self.rows:
            row = [r.grid, r.E_eps, r.nodes, r.edges, r.continuous, r.binary, r.constraints,
                   repr(r.objective), int(r.optimal), r.bb_nodes]
            if timing:
                row += [f"{r.build_s:.4f}", f"{r.solve_s:.4f}"]
            w.writerow(row)
        return buf.getvalue()


def bench_document(n: int, E_eps: int, template: dict[str, Any] | None = None) -> dict[str, Any]:
    """Square ``n`` x ``n`` copy of the template with no planted targets, goal next to the far corner."""
    doc = copy.deepcopy(template if template is not None else mars_document())
    doc["grid"].update(width=n, height=n, init=[0, 0], goal=[n - 1, n - 2])
    doc["targets"]["placement"] = []
    doc["budget"]["E"] = E_eps
    return doc


def bench_one(n: int, E_eps: int, n_rem: int = 3, template=None, config: SolverConfig | None = None) -> BenchRow:
    sc = load_scenario(bench_document(n, E_eps, template))
    t0 = time.perf_counter()
    g = construct_product_dag(sc.grid, E_eps)
    g = prune(g, g.initial)
    x = sc.grid.init
    k = KnowledgeMap(n, n, sc.refinement)
    update_knowledge(k, x, Sensor(sc).observe_all(x))
    f = compute_reward_field(k, [x], n_rem, sc)
    m = build_model(g, x, f, sc.discount, sc.sensing_range)
    t1 = time.perf_counter()
    sol = solve(m, config)
    t2 = time.perf_counter()
    return BenchRow(
        grid=f"{n}x{n}", E_eps=E_eps, nodes=len(g), edges=g.n_edges,
        continuous=m.n_continuous, binary=m.n_binary, constraints=len(m.constraints),
        objective=sol.objective, optimal=sol.optimal, bb_nodes=sol.stats.bb_nodes,
        build_s=t1 - t0, solve_s=t2 - t1,
    )


def run_bench(sizes: Iterable[tuple[int, int]] = DEFAULT_SIZES, n_rem: int = 3, template=None,
              config: SolverConfig | None = None) -> BenchReport:
    return BenchReport([bench_one(n, e, n_rem, template, config) for n, e in sizes])
