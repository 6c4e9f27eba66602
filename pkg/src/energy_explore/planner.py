"""Online receding-horizon exploration loop and its JSONL trace.

Each iteration observes the sensing neighbourhood, services the current cell
when it holds an affordable target, rebuilds the reward field, re-solves the
path model on the product graph pruned to the current (cell, energy) node and
executes only the first move.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .budget import ALLOCATION_STREAM, EnergyAllocation, sample_energy_budget, stream
from .milp import MilpModel, PathExplosion, SolverConfig, build_model, oracle_solve, solve
from .product import InvariantViolation, ProductGraph, ProductNode, construct_product_dag, prune
from .reward import RewardField, compute_reward_field
from .tracking import KnowledgeMap, update_knowledge
from .world import Cell, Scenario, Sensor, canonical_json, scenario_hash

# no_service reasons
NOT_TARGET = "not_target"
ALREADY_SERVICED = "already_serviced"
UNAFFORDABLE = "unaffordable"

# --verify enumerates paths only while the graph stays this small
VERIFY_PATH_LIMIT = 5_000


class PlannerError(RuntimeError):
    """Misuse of the planner API (e.g. stepping after the goal was reached)."""


def _num(x: Fraction | int | float) -> int | float:
    x = Fraction(x)
    return int(x) if x.denominator == 1 else float(x)


@dataclass
class Trace:
    header: dict[str, Any]
    events: list[dict[str, Any]] = field(default_factory=list)
    footer: dict[str, Any] | None = None

    def to_jsonl(self) -> str:
        lines = [canonical_json({"kind": "header", **self.header})]
        lines += [canonical_json(e) for e in self.events]
        if self.footer is not None:
            lines.append(canonical_json({"kind": "footer", **self.footer}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> Trace:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("kind") != "header":
            raise ValueError("trace must start with a header line")
        header = {k: v for k, v in rows[0].items() if k != "kind"}
        footer = None
        if rows[-1].get("kind") == "footer":
            footer = {k: v for k, v in rows.pop().items() if k != "kind"}
        return cls(header, rows[1:], footer)

    def of_kind(self, kind: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["kind"] == kind]

    @property
    def moves(self) -> list[Cell]:
        return [Cell(*e["cell"]) for e in self.of_kind("move")]


@dataclass
class StepRecord:
    """Per-step solver statistics (one CSV row)."""

    step: int
    n_nodes: int
    n_edges: int
    n_binary: int
    n_continuous: int
    bb_nodes: int
    wall_ms: float

    COLUMNS = ("step", "nodes", "edges", "binary", "continuous", "bb_nodes", "wall_ms")

    def row(self) -> list:
        return [self.step, self.n_nodes, self.n_edges, self.n_binary, self.n_continuous,
                self.bb_nodes, f"{self.wall_ms:.3f}"]


class Planner:
    """Mutable state of one exploration run; ``step`` executes one loop iteration."""

    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        config: SolverConfig | None = None,
        verify: bool = False,
        keep_fields: bool = False,
    ):
        if scenario.placement == "random":
            raise PlannerError("scenario has a random placement; realise it with generate_scenarios first")
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.config = config or SolverConfig()
        self.verify = verify
        self.keep_fields = keep_fields
        self._sensor = Sensor(scenario)

        self.allocation: EnergyAllocation = sample_energy_budget(scenario, stream(self.seed, ALLOCATION_STREAM))
        self.graph: ProductGraph = construct_product_dag(scenario.grid, self.allocation.E_eps)

        grid = scenario.grid
        self.knowledge = KnowledgeMap(grid.width, grid.height, scenario.refinement)
        self.x = Cell(*grid.init)
        self.E_eps = self.allocation.E_eps
        self.E_kappa = self.allocation.E_kappa
        self.R_serv = Fraction(0)
        self.serviced: list[Cell] = []
        self.path: list[Cell] = []
        self.n_steps = 0
        self.fields: list[RewardField] = []
        self.stats: list[StepRecord] = []
        self.trace = Trace(header={
            "scenario": scenario_hash(scenario),
            "seed": self.seed,
            "allocation": self.allocation.to_json(),
        })
        self._emit("move", cell=list(self.x), E_eps=self.E_eps)

    @property
    def done(self) -> bool:
        return self.x == self.scenario.grid.goal

    @property
    def n_remaining(self) -> int:
        return max(self.allocation.N - len(self.serviced), 0)

    def _emit(self, kind: str, **payload) -> None:
        self.trace.events.append({"kind": kind, "step": self.n_steps, **payload})

    def _service(self) -> None:
        sc = self.scenario
        x = self.x
        sym = self.knowledge[x]  # distance-0 observation: the ground truth
        if sym not in sc.targets:
            self._emit("no_service", cell=list(x), symbol=sym, reason=NOT_TARGET)
        elif x in self.serviced:
            self._emit("no_service", cell=list(x), symbol=sym, reason=ALREADY_SERVICED)
        elif sc.energies[sym] > self.E_kappa:
            self._emit("no_service", cell=list(x), symbol=sym, reason=UNAFFORDABLE)
        else:
            self.E_kappa -= sc.energies[sym]
            self.R_serv += sc.rewards[sym]
            self.serviced.append(x)
            self._emit("service", cell=list(x), symbol=sym, reward=_num(sc.rewards[sym]), E_kappa=self.E_kappa)

    def prepare(self) -> MilpModel:
        """First half of an iteration: observe, service, rebuild rewards and the model."""
        if self.done:
            raise PlannerError("goal already reached")
        sc = self.scenario
        self.path.append(self.x)
        obs = self._sensor.observe_all(self.x)
        updates = update_knowledge(self.knowledge, self.x, obs)
        self._emit("knowledge", cell=list(self.x), updates=[u.to_json() for u in updates])
        self._service()

        field_ = compute_reward_field(self.knowledge, self.path, self.n_remaining, sc)
        if self.keep_fields:
            self.fields.append(field_)
        g = prune(self.graph, ProductNode(self.x, self.E_eps))
        return build_model(g, self.x, field_, sc.discount, sc.sensing_range)

    def step(self) -> Cell:
        """One observe / service / plan / move iteration; returns the new cell."""
        sc = self.scenario
        model = self.prepare()
        g, field_ = model.graph, model.field
        sol = solve(model, self.config)
        if self.verify:
            try:
                ref = oracle_solve(g, self.x, field_, sc.discount, sc.sensing_range, VERIFY_PATH_LIMIT)
            except PathExplosion:
                self._emit("verify", status="skipped", reason=f"more than {VERIFY_PATH_LIMIT} paths")
            else:
                if not math.isclose(sol.objective, ref.objective, rel_tol=0.0, abs_tol=1e-9):
                    raise InvariantViolation(
                        f"step {self.n_steps}: solver objective {sol.objective!r} != oracle {ref.objective!r}"
                    )
                self._emit("verify", status="ok", objective=ref.objective)
        if len(sol.grid_path) < 2:
            raise InvariantViolation(f"step {self.n_steps}: plan does not leave {tuple(self.x)}")
        self.stats.append(StepRecord(
            self.n_steps, len(g), g.n_edges, model.n_binary, model.n_continuous,
            sol.stats.bb_nodes, sol.stats.wall_ms,
        ))
        self._emit(
            "plan", path=[list(c) for c in sol.grid_path], objective=sol.objective,
            optimal=sol.optimal, stats=sol.stats.to_json(),
        )

        nxt = sol.next_cell
        self.E_eps -= sc.grid.weight(self.x, nxt)
        if self.E_eps < 0:
            raise InvariantViolation(f"step {self.n_steps}: motion energy exhausted")
        self.x = nxt
        self.n_steps += 1
        self._emit("move", cell=list(self.x), E_eps=self.E_eps)
        if self.done:
            self._finish()
        return self.x

    def _finish(self) -> None:
        a = self.allocation
        self.trace.footer = {
            "R_serv": _num(self.R_serv),
            "serviced": [list(c) for c in self.serviced],
            "E_eps": self.E_eps,
            "E_kappa": self.E_kappa,
            "consumed": (a.E_eps - self.E_eps) + (a.E_kappa - self.E_kappa),
            "steps": self.n_steps,
        }

    def run(self) -> Trace:
        while not self.done:
            self.step()
        if self.trace.footer is None:  # init == goal
            self._finish()
        return self.trace


def run_eisp(scenario: Scenario, seed: int | None = None, config: SolverConfig | None = None,
             verify: bool = False) -> Trace:
    return Planner(scenario, seed, config, verify).run()
