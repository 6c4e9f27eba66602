"""Grid world, symbol refinement tree, hidden labels and the distance-dependent sensor."""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple

import yaml

PRIOR_TOL = 1e-9


class ScenarioError(ValueError):
    """Validation failure in a scenario document; ``path`` points into the document."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class Cell(NamedTuple):
    row: int
    col: int


def manhattan(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def as_fraction(value: Any) -> Fraction:
    """Rationals come in as decimal strings ("0.6"), ints or "p/q" strings."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a rational")
    if isinstance(value, float):
        # route through repr so 0.1 becomes 1/10, not the binary expansion
        return Fraction(repr(value))
    return Fraction(str(value).strip())


@dataclass(frozen=True)
class RefinementSpec:
    """Layered perception refinement.

    ``layers[d]`` holds the symbols observable at Manhattan distance ``d``;
    ``layers[0]`` are the ground-truth symbols. ``priors[s]`` is the
    distribution over the next finer layer for every symbol above layer 0
    and for the root. The parent relation must be a tree.
    """

    layers: tuple[tuple[str, ...], ...]
    priors: Mapping[str, Mapping[str, Fraction]]
    parent: Mapping[str, str]
    root: str = "ROOT"
    empty: str = "EMPTY"
    _layer: dict[str, int] = field(init=False, repr=False, compare=False)
    _children: dict[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)
    _memo: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        layer = {s: d for d, syms in enumerate(self.layers) for s in syms}
        layer[self.root] = len(self.layers)
        children: dict[str, list[str]] = {s: [] for s in layer}
        for child, par in self.parent.items():
            if par in children:
                children[par].append(child)
        object.__setattr__(self, "_layer", layer)
        object.__setattr__(
            self, "_children", {s: tuple(sorted(c)) for s, c in children.items()}
        )
        object.__setattr__(self, "_memo", {})

    @property
    def depth(self) -> int:
        """Finest-to-coarsest layer count minus one, i.e. the sensing range D."""
        return len(self.layers) - 1

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(s for syms in self.layers for s in syms)

    def layer(self, symbol: str) -> int:
        try:
            return self._layer[symbol]
        except KeyError:
            raise KeyError(f"unknown symbol {symbol!r}") from None

    def children(self, symbol: str) -> tuple[str, ...]:
        return self._children[symbol]

    def ancestor(self, symbol: str, d: int) -> str:
        """Return the layer-``d`` ancestor of ``symbol`` (``symbol`` itself at its own layer)."""
        if d < self.layer(symbol):
            raise ValueError(f"{symbol!r} has no ancestor at finer layer {d}")
        s = symbol
        while self._layer[s] < d:
            s = self.parent[s]
        return s

    def is_descendant(self, symbol: str, ancestor: str) -> bool:
        """``symbol`` precedes-or-equals ``ancestor`` in the refinement order."""
        s = symbol
        while True:
            if s == ancestor:
                return True
            if s == self.root:
                return False
            s = self.parent[s]

    def leaves_below(self, symbol: str) -> list[str]:
        out = []
        stack = [symbol]
        while stack:
            s = stack.pop()
            if self._layer[s] == 0:
                out.append(s)
            else:
                stack.extend(self._children[s])
        return sorted(out)


@dataclass(frozen=True)
class GridTS:
    """4-connected weighted grid. ``labels`` is the hidden ground-truth labelling, row-major."""

    width: int
    height: int
    init: Cell
    goal: Cell
    labels: tuple[str, ...]
    weights: Mapping[tuple[int, int], int] | None = None  # None means unit weights

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def index(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.width + cell[1]

    def cell(self, idx: int) -> Cell:
        return Cell(*divmod(idx, self.width))

    def cells(self) -> list[Cell]:
        return [Cell(r, c) for r in range(self.height) for c in range(self.width)]

    def contains(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def weight(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        if manhattan(a, b) != 1 or not (self.contains(a) and self.contains(b)):
            raise ValueError(f"no transition between {tuple(a)} and {tuple(b)}")
        if self.weights is None:
            return 1
        return self.weights.get((self.index(a), self.index(b)), 1)

    def shortest_energy(self, src: tuple[int, int], dst: tuple[int, int]) -> int:
        if self.weights is None:
            return manhattan(src, dst)
        dist = {Cell(*src): 0}
        heap = [(0, Cell(*src))]
        while heap:
            d, x = heapq.heappop(heap)
            if x == dst:
                return d
            if d > dist[x]:
                continue
            for y in sorted(neighbors(self, x)):
                nd = d + self.weight(x, y)
                if nd < dist.get(y, nd + 1):
                    dist[y] = nd
                    heapq.heappush(heap, (nd, y))
        raise ValueError(f"{tuple(dst)} unreachable from {tuple(src)}")


def neighbors(grid: GridTS, x: tuple[int, int]) -> set[Cell]:
    r, c = x
    cand = ((r - 1, c), (r, c + 1), (r + 1, c), (r, c - 1))
    return {Cell(*y) for y in cand if grid.contains(y)}


def sensing_neighborhood(grid: GridTS, x: tuple[int, int], D: int) -> dict[int, set[Cell]]:
    """Cells grouped by exact Manhattan distance 0..D from ``x``."""
    if D < 0:
        raise ValueError("sensing range must be non-negative")
    out: dict[int, set[Cell]] = {d: set() for d in range(D + 1)}
    r0, c0 = x
    for r in range(max(0, r0 - D), min(grid.height, r0 + D + 1)):
        span = D - abs(r - r0)
        for c in range(max(0, c0 - span), min(grid.width, c0 + span + 1)):
            out[abs(r - r0) + abs(c - c0)].add(Cell(r, c))
    return out


@dataclass(frozen=True)
class Scenario:
    grid: GridTS
    refinement: RefinementSpec
    targets: tuple[str, ...]
    rewards: Mapping[str, Fraction]
    energies: Mapping[str, int]
    budget: int
    sensing_range: int
    discount: Fraction = Fraction(1, 2)
    exploration_reward: Fraction | None = None
    geometric_p: Fraction = Fraction(1, 2)
    seed: int = 0
    placement: str = "explicit"
    planted: tuple[tuple[Cell, str], ...] = ()

    @property
    def r_epsilon(self) -> Fraction:
        if self.exploration_reward is not None:
            return self.exploration_reward
        return Fraction(1, 10) * min(self.rewards[t] for t in self.targets)

    def label(self, cell: tuple[int, int]) -> str:
        return self.grid.labels[self.grid.index(cell)]

    def with_planted(self, planted: Iterable[tuple[Cell, str]], seed: int | None = None) -> Scenario:
        """Copy with a new explicit placement; every other cell holds the empty symbol."""
        planted = tuple(sorted((Cell(*c), s) for c, s in planted))
        labels = [self.refinement.empty] * self.grid.n_cells
        for c, s in planted:
            labels[self.grid.index(c)] = s
        grid = GridTS(
            self.grid.width, self.grid.height, self.grid.init, self.grid.goal,
            tuple(labels), self.grid.weights,
        )
        return Scenario(
            grid=grid, refinement=self.refinement, targets=self.targets,
            rewards=self.rewards, energies=self.energies, budget=self.budget,
            sensing_range=self.sensing_range, discount=self.discount,
            exploration_reward=self.exploration_reward, geometric_p=self.geometric_p,
            seed=self.seed if seed is None else seed, placement="explicit", planted=planted,
        )


def observe(scenario: Scenario, robot: tuple[int, int], target_cell: tuple[int, int]) -> str:
    """Symbol seen for ``target_cell`` from ``robot``: the layer-d ancestor of its ground truth."""
    d = manhattan(robot, target_cell)
    if d > scenario.sensing_range or not scenario.grid.contains(target_cell):
        raise ValueError(f"cell {tuple(target_cell)} not visible from {tuple(robot)}")
    return scenario.refinement.ancestor(scenario.label(target_cell), d)


class Sensor:
    """Planner-side handle on a scenario: exposes observations, never the labelling."""

    def __init__(self, scenario: Scenario):
        self._scenario = scenario

    def observe_all(self, robot: tuple[int, int]) -> dict[Cell, str]:
        sc = self._scenario
        hood = sensing_neighborhood(sc.grid, robot, sc.sensing_range)
        return {x: observe(sc, robot, x) for d in sorted(hood) for x in sorted(hood[d])}


# ---------------------------------------------------------------------------
# document loading / canonical serialisation
# ---------------------------------------------------------------------------


def _req(doc: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(doc, Mapping):
        raise ScenarioError(path, "expected a mapping")
    if key not in doc:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return doc[key]


def _int(value: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {value}")
    return value


def _cell(value: Any, path: str) -> Cell:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(path, f"expected [row, col], got {value!r}")
    return Cell(_int(value[0], f"{path}[0]", 0), _int(value[1], f"{path}[1]", 0))


def _rational(value: Any, path: str) -> Fraction:
    try:
        return as_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ScenarioError(path, f"not a rational number: {value!r}") from None


def _load_refinement(doc: Mapping[str, Any], D: int) -> RefinementSpec:
    sym = _req(doc, "symbols", "")
    root = str(sym.get("root", "ROOT"))
    empty = str(_req(sym, "empty", "symbols"))
    raw_layers = _req(sym, "layers", "symbols")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ScenarioError("symbols.layers", "expected a non-empty list of symbol lists")
    layers = []
    seen: set[str] = set()
    for d, syms in enumerate(raw_layers):
        if not isinstance(syms, list) or not syms:
            raise ScenarioError(f"symbols.layers[{d}]", "expected a non-empty list")
        for s in syms:
            if s in seen or s == root:
                raise ScenarioError(f"symbols.layers[{d}]", f"duplicate symbol {s!r}")
            seen.add(s)
        layers.append(tuple(str(s) for s in syms))
    if len(layers) != D + 1:
        raise ScenarioError(
            "symbols.layers", f"need {D + 1} layers for sensing range D={D}, got {len(layers)}"
        )
    layer_of = {s: d for d, syms in enumerate(layers) for s in syms}
    layer_of[root] = len(layers)
    if empty not in layers[0]:
        raise ScenarioError("symbols.empty", f"{empty!r} is not a layer-0 symbol")

    raw_priors = _req(sym, "priors", "symbols")
    priors: dict[str, dict[str, Fraction]] = {}
    for owner in [root] + [s for syms in layers[1:] for s in syms]:
        p = f"symbols.priors.{owner}"
        row = raw_priors.get(owner)
        if not isinstance(row, Mapping) or not row:
            raise ScenarioError(p, "missing prior distribution")
        parsed = {}
        for child, val in row.items():
            if child not in layer_of:
                raise ScenarioError(f"{p}.{child}", "unknown symbol")
            if layer_of[child] != layer_of[owner] - 1:
                raise ScenarioError(f"{p}.{child}", "prior mass must go to the next finer layer")
            prob = _rational(val, f"{p}.{child}")
            if not 0 < prob <= 1:
                raise ScenarioError(f"{p}.{child}", f"probability must lie in (0, 1], got {val}")
            parsed[str(child)] = prob
        total = sum(parsed.values())
        if abs(float(total) - 1.0) > PRIOR_TOL:
            raise ScenarioError(p, f"prior of {owner!r} sums to {float(total)}, not 1")
        priors[owner] = parsed
    extra = set(raw_priors) - set(priors)
    if extra:
        raise ScenarioError("symbols.priors", f"priors for unknown or layer-0 symbols: {sorted(extra)}")

    raw_parents = _req(sym, "parents", "symbols")
    parents: dict[str, str] = {}
    for s, d in layer_of.items():
        if s == root:
            continue
        p = f"symbols.parents.{s}"
        if s not in raw_parents:
            raise ScenarioError(p, "missing parent")
        par = str(raw_parents[s])
        if par not in layer_of or layer_of[par] != d + 1:
            raise ScenarioError(p, f"parent {par!r} is not in the next coarser layer")
        parents[s] = par
    # tree restriction: the support of every prior row is exactly its children
    for owner, row in priors.items():
        for child in row:
            if parents[child] != owner:
                raise ScenarioError(
                    f"symbols.priors.{owner}.{child}",
                    f"refinement is not a tree: {child!r} already has parent {parents[child]!r}",
                )
    for child, par in parents.items():
        if child not in priors[par]:
            raise ScenarioError(f"symbols.parents.{child}", f"prior of {par!r} gives {child!r} no mass")
    return RefinementSpec(tuple(layers), priors, parents, root=root, empty=empty)


def load_scenario(document: Mapping[str, Any]) -> Scenario:
    """Validate a scenario document and build a :class:`Scenario`."""
    perception = _req(document, "perception", "")
    D = _int(_req(perception, "D", "perception"), "perception.D", 1)
    refinement = _load_refinement(document, D)

    g = _req(document, "grid", "")
    width = _int(_req(g, "width", "grid"), "grid.width", 1)
    height = _int(_req(g, "height", "grid"), "grid.height", 1)
    init = _cell(_req(g, "init", "grid"), "grid.init")
    goal = _cell(_req(g, "goal", "grid"), "grid.goal")
    for name, c in (("init", init), ("goal", goal)):
        if not (c.row < height and c.col < width):
            raise ScenarioError(f"grid.{name}", f"{tuple(c)} outside {height}x{width} grid")
    if init == goal:
        raise ScenarioError("grid.goal", "goal must differ from the initial cell")
    weights = _load_weights(g.get("weights", "unit"), width, height)

    t = _req(document, "targets", "")
    targets = tuple(str(s) for s in _req(t, "list", "targets"))
    if not targets:
        raise ScenarioError("targets.list", "at least one target symbol required")
    for i, s in enumerate(targets):
        if s not in refinement.layers[0]:
            raise ScenarioError(f"targets.list[{i}]", f"{s!r} is not a layer-0 symbol")
        if s == refinement.empty:
            raise ScenarioError(f"targets.list[{i}]", "the empty symbol cannot be a target")
    raw_rewards = _req(t, "rewards", "targets")
    raw_energies = _req(t, "energies", "targets")
    rewards = {}
    energies = {s: 0 for s in refinement.layers[0]}
    for s in targets:
        if s not in raw_rewards:
            raise ScenarioError(f"targets.rewards.{s}", "missing reward")
        rewards[s] = _rational(raw_rewards[s], f"targets.rewards.{s}")
        if rewards[s] <= 0:
            raise ScenarioError(f"targets.rewards.{s}", "reward must be positive")
        if s not in raw_energies:
            raise ScenarioError(f"targets.energies.{s}", "target without servicing energy")
        energies[s] = _int(raw_energies[s], f"targets.energies.{s}")
        if energies[s] <= 0:
            raise ScenarioError(f"targets.energies.{s}", "target servicing energy must be positive")
    for s, e in raw_energies.items():
        if s not in targets and e != 0:
            raise ScenarioError(f"targets.energies.{s}", "only targets may carry servicing energy")

    placement_doc = t.get("placement", [])
    planted: list[tuple[Cell, str]] = []
    placement = "explicit"
    if placement_doc == "random":
        placement = "random"
    elif isinstance(placement_doc, list):
        seen_cells = set()
        for i, item in enumerate(placement_doc):
            p = f"targets.placement[{i}]"
            c = _cell(_req(item, "cell", p), f"{p}.cell")
            s = str(_req(item, "symbol", p))
            if not (c.row < height and c.col < width):
                raise ScenarioError(f"{p}.cell", f"{tuple(c)} outside grid")
            if s not in refinement.layers[0]:
                raise ScenarioError(f"{p}.symbol", f"{s!r} is not a layer-0 symbol")
            if c in seen_cells:
                raise ScenarioError(f"{p}.cell", f"{tuple(c)} placed twice")
            seen_cells.add(c)
            planted.append((c, s))
    else:
        raise ScenarioError("targets.placement", "expected a list or 'random'")

    E = _int(_req(_req(document, "budget", ""), "E", "budget"), "budget.E", 1)
    planner = document.get("planner", {}) or {}
    lam = _rational(planner.get("lambda", "0.5"), "planner.lambda")
    if not 0 < lam < 1:
        raise ScenarioError("planner.lambda", "discount must lie in (0, 1)")
    r_eps = None
    if planner.get("r_epsilon") is not None:
        r_eps = _rational(planner["r_epsilon"], "planner.r_epsilon")
        if r_eps <= 0:
            raise ScenarioError("planner.r_epsilon", "exploration reward must be positive")
    dist = planner.get("distribution", {"kind": "geometric", "p": "0.5"})
    if dist.get("kind", "geometric") != "geometric":
        raise ScenarioError("planner.distribution.kind", "only 'geometric' is supported")
    p_geo = _rational(dist.get("p", "0.5"), "planner.distribution.p")
    if not 0 < p_geo <= 1:
        raise ScenarioError("planner.distribution.p", "success probability must lie in (0, 1]")
    seed = _int(document.get("seed", 0), "seed", 0)
    if seed >= 2**64:
        raise ScenarioError("seed", "seed must fit in 64 bits")

    labels = [refinement.empty] * (width * height)
    grid = GridTS(width, height, init, goal, tuple(labels), weights)
    e_goal = grid.shortest_energy(init, goal)
    if E < e_goal:
        raise ScenarioError("budget.E", f"budget {E} below shortest-path energy {e_goal} to goal")
    sc = Scenario(
        grid=grid, refinement=refinement, targets=targets, rewards=rewards,
        energies=energies, budget=E, sensing_range=D, discount=lam,
        exploration_reward=r_eps, geometric_p=p_geo, seed=seed, placement=placement,
    )
    if placement == "explicit":
        sc = sc.with_planted(planted)
    return sc


def _load_weights(spec: Any, width: int, height: int) -> dict[tuple[int, int], int] | None:
    if spec == "unit":
        return None
    if not isinstance(spec, Mapping):
        raise ScenarioError("grid.weights", "expected 'unit' or {default, edges}")
    default = _int(spec.get("default", 1), "grid.weights.default", 1)
    out = {}
    for r in range(height):
        for c in range(width):
            for dr, dc in ((0, 1), (1, 0)):
                r2, c2 = r + dr, c + dc
                if r2 < height and c2 < width:
                    a, b = r * width + c, r2 * width + c2
                    out[(a, b)] = out[(b, a)] = default
    for i, e in enumerate(spec.get("edges", [])):
        p = f"grid.weights.edges[{i}]"
        if not isinstance(e, (list, tuple)) or len(e) != 5:
            raise ScenarioError(p, "expected [r1, c1, r2, c2, w]")
        r1, c1, r2, c2 = (_int(v, p, 0) for v in e[:4])
        w = _int(e[4], p, 1)
        if abs(r1 - r2) + abs(c1 - c2) != 1 or max(r1, r2) >= height or max(c1, c2) >= width:
            raise ScenarioError(p, "edge must join two 4-adjacent in-grid cells")
        a, b = r1 * width + c1, r2 * width + c2
        out[(a, b)] = out[(b, a)] = w
    return out


def _frac_str(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    # decimal form when exact, p/q otherwise
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d == 1:
        s = f"{float(x):.17f}".rstrip("0").rstrip(".")
        if as_fraction(s) == x:
            return s
    return f"{x.numerator}/{x.denominator}"


def scenario_to_document(sc: Scenario) -> dict[str, Any]:
    ref = sc.refinement
    g = sc.grid
    if g.weights is None:
        weights: Any = "unit"
    else:
        edges = []
        for (a, b), w in sorted(g.weights.items()):
            if a < b and w != 1:
                ca, cb = g.cell(a), g.cell(b)
                edges.append([ca.row, ca.col, cb.row, cb.col, w])
        weights = {"default": 1, "edges": edges}
    planner: dict[str, Any] = {
        "lambda": _frac_str(sc.discount),
        "distribution": {"kind": "geometric", "p": _frac_str(sc.geometric_p)},
    }
    if sc.exploration_reward is not None:
        planner["r_epsilon"] = _frac_str(sc.exploration_reward)
    return {
        "grid": {
            "width": g.width, "height": g.height,
            "init": list(g.init), "goal": list(g.goal), "weights": weights,
        },
        "symbols": {
            "root": ref.root,
            "empty": ref.empty,
            "layers": [list(l) for l in ref.layers],
            "parents": dict(ref.parent),
            "priors": {k: {c: _frac_str(p) for c, p in row.items()} for k, row in ref.priors.items()},
        },
        "targets": {
            "list": list(sc.targets),
            "rewards": {s: _frac_str(r) for s, r in sc.rewards.items()},
            "energies": {s: sc.energies[s] for s in sc.targets},
            "placement": "random" if sc.placement == "random"
            else [{"cell": list(c), "symbol": s} for c, s in sc.planted],
        },
        "budget": {"E": sc.budget},
        "perception": {"D": sc.sensing_range},
        "planner": planner,
        "seed": sc.seed,
    }


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def scenario_hash(sc: Scenario) -> str:
    return hashlib.sha256(canonical_json(scenario_to_document(sc)).encode()).hexdigest()


def read_document(path: str | Path) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ScenarioError("", f"cannot parse {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("", f"{path} does not contain a mapping")
    return doc


def read_scenario(path: str | Path) -> Scenario:
    return load_scenario(read_document(path))


def mars_document() -> dict[str, Any]:
    """The bundled 8x8 Mars sample-collection case study."""
    from importlib import resources

    text = resources.files("energy_explore.data").joinpath("mars.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)
