from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from energy_explore.milp import (
    SINK, PathSearch, SolverConfig, assignment, build_model, export_lp, oracle_solve, solve,
)
from energy_explore.milp.model import BINARY
from energy_explore.milp.oracle import PathExplosion, iter_paths
from energy_explore.product import InvariantViolation, construct_product_dag, prune
from energy_explore.reward import RewardField, path_collected_reward
from energy_explore.world import Cell, GridTS, manhattan

from conftest import random_field

HALF = Fraction(1, 2)


def setup(w, h, E, vals=None, init=(0, 0), goal=None, D=1, lam=HALF, rng=None):
    goal = goal if goal is not None else (h - 1, w - 1)
    grid = GridTS(w, h, Cell(*init), Cell(*goal), ("e",) * (w * h))
    g = construct_product_dag(grid, E)
    g = prune(g, g.initial)
    field = RewardField.from_values(w, h, vals) if vals is not None else random_field(rng, w, h)
    return g, field, build_model(g, init, field, lam, D)


def check_constraints(model, x, tol=1e-9):
    for row in model.constraints:
        lhs = sum(c * x[i] for i, c in row.coefs)
        if row.sense == "=":
            assert abs(lhs - row.rhs) <= tol, row.name
        elif row.sense == "<=":
            assert lhs <= row.rhs + tol, row.name
        else:
            assert lhs >= row.rhs - tol, row.name
    for v, val in zip(model.variables, x):
        assert v.lb - tol <= val <= v.ub + tol, v.name
        if v.kind == BINARY:
            assert val in (0.0, 1.0)


def check_solution(model, sol):
    g = model.graph
    p = sol.node_path
    # simple source -> sink path along DAG edges
    assert p[0] == g.initial and g.is_final[p[-1]]
    assert len(set(p)) == len(p)
    assert all(b in g.succ[a] for a, b in zip(p, p[1:]))
    assert sol.edges[-1] == (p[-1], SINK)
    assert sol.grid_path[0] == g.source.cell and sol.grid_path[-1] == g.goal
    x = assignment(model, p)
    check_constraints(model, x)
    assert math.isclose(sum(x[i] * c for i, c in model.objective.items()), sol.objective, abs_tol=1e-9)
    # linking: y_x = 1 iff some product node of x is on the path
    cells = {g.node_cell[u] for u in p}
    assert {i for i, yi in enumerate(model.y) if x[yi] == 1.0} == cells
    exact = path_collected_reward(model.field, sol.grid_path, Fraction(model.lam).limit_denominator(10**9), model.D)
    assert math.isclose(float(exact), sol.objective, abs_tol=1e-9)


def test_zero_field_objective_zero():
    g, f, m = setup(3, 3, 6, [0] * 9)
    sol = solve(m)
    assert sol.objective == 0
    check_solution(m, sol)


def test_two_by_two_example():
    vals = [0, 5, 1, 0]
    g, f, m = setup(2, 2, 2, vals, D=0)
    sol = solve(m)
    assert sol.grid_path == [Cell(0, 0), Cell(0, 1), Cell(1, 1)]
    assert sol.objective == 5
    assert oracle_solve(g, (0, 0), f, HALF, 0).objective == 5
    check_solution(m, sol)


def test_single_path_graph():
    g, f, m = setup(1, 4, 3, [1, 2, 3, 4], D=0)
    assert len(list(iter_paths(g))) == 1
    sol = solve(m)
    assert sol.objective == 10 and len(sol.grid_path) == 4


def test_variable_counts():
    g, f, m = setup(4, 4, 8, [1] * 16, D=2)
    X = 16
    hood = sum(sum(1 for y in itertools.product(range(4), range(4)) if manhattan(x, y) <= 2)
               for x in itertools.product(range(4), range(4)))
    assert len(m.variables) == g.n_edges + len(g.final) + len(g) + 1 + X + (hood + X) + X
    assert m.n_continuous == 2 * X
    assert m.n_binary == len(m.variables) - 2 * X
    # every selection variable joins cells within range
    for (x, xo), _ in m.sig.items():
        if xo != SINK:
            assert manhattan(divmod(x, 4), divmod(xo, 4)) <= 2
    # one flow row per node plus the sink row
    assert sum(1 for r in m.constraints if r.name.startswith("flow_")) == len(g) + 1


def test_build_model_preconditions():
    grid = GridTS(2, 2, Cell(0, 0), Cell(1, 1), ("e",) * 4)
    g = construct_product_dag(grid, 2)
    f = RewardField.from_values(2, 2, [0] * 4)
    with pytest.raises(ValueError):
        build_model(g, (0, 1), f, HALF, 1)


@given(st.integers(0, 2**32), st.sampled_from([(2, 2), (2, 3), (3, 3)]), st.integers(0, 4), st.integers(0, 2))
def test_solver_matches_oracle(seed, size, slack, D):
    rng = random.Random(seed)
    w, h = size
    g, f, m = setup(w, h, w + h - 2 + slack, rng=rng, D=D)
    sol = solve(m)
    ref = oracle_solve(g, (0, 0), f, HALF, D)
    assert math.isclose(sol.objective, float(ref.exact_objective), abs_tol=1e-9)
    check_solution(m, sol)


def test_uniform_positive_rewards_max_coverage():
    # with D=0 and uniform rewards, the optimum visits as many distinct cells as possible
    g, f, m = setup(4, 4, 8, [1] * 16, D=0)
    sol = solve(m)
    best_cover = max(len({g.nodes[u].cell for u in p}) for p in iter_paths(g))
    assert sol.objective == best_cover == oracle_solve(g, (0, 0), f, HALF, 0).objective


@given(st.integers(0, 2**32), st.integers(0, 2))
def test_bound_is_admissible(seed, D):
    rng = random.Random(seed)
    g, f, m = setup(3, 3, 6, rng=rng, D=D)
    s = PathSearch(m)
    best_below = {}

    def completions(u, prefix):
        # best exact total over every completion of prefix (which ends at u)
        vals = []
        if g.is_final[u]:
            vals.append(s.exact_total())
        here = s.total
        for v in g.succ[u]:
            undo = s.apply(v)
            vals.append(completions(v, prefix + [v]))
            s.revert(undo, here)
        best = max(vals) if vals else -math.inf
        assert s.total + s.bound(u) >= best - 1e-9, prefix
        best_below[tuple(prefix)] = best
        return best

    s.apply(g.initial)
    top = completions(g.initial, [g.initial])
    assert math.isclose(top, solve(m).objective, abs_tol=1e-9)


def test_node_limit_returns_flagged_incumbent():
    rng = random.Random(3)
    g, f, m = setup(5, 5, 12, rng=rng, D=2)
    sol = solve(m, SolverConfig(node_limit=100))
    assert sol.stats.bb_nodes <= 101
    assert not sol.optimal
    check_solution(m, sol)
    assert solve(m).objective >= sol.objective


def test_empty_graph_is_invariant_violation():
    g, f, m = setup(2, 2, 2, [0] * 4)
    m.graph.final = ()
    with pytest.raises(InvariantViolation):
        solve(m)


def test_solver_is_deterministic():
    rng = random.Random(11)
    g, f, m = setup(4, 4, 9, rng=rng, D=2)
    a, b = solve(m), solve(m)
    assert a.node_path == b.node_path and a.objective == b.objective
    assert a.stats.to_json() == b.stats.to_json()
    assert "wall_ms" not in a.stats.to_json() and "wall_ms" in a.stats.to_json(timing=True)


def test_oracle_path_guard():
    g, f, m = setup(4, 4, 10, [1] * 16)
    with pytest.raises(PathExplosion):
        oracle_solve(g, (0, 0), f, HALF, 1, limit=10)


# --- LP export ---------------------------------------------------------------------


def _lp_rows(text):
    lines = text.splitlines()
    start, end = lines.index("Subject To"), lines.index("Bounds")
    return lines[start + 1:end]


def test_lp_row_count_and_determinism():
    g, f, m = setup(2, 2, 2, [0, 5, 1, 0], D=0)
    text = export_lp(m)
    assert len(_lp_rows(text)) == len(m.constraints)
    assert export_lp(m) == text
    _, _, m2 = setup(2, 2, 2, [0, 5, 1, 0], D=0)
    assert export_lp(m2) == text
    assert "zeta_0_1" in text and "z_sink" in text and "y_0_1" in text
    assert "sig_0_1_0_1" in text and "sig_0_1_null" in text and "t_1_1 free" in text
    assert text.rstrip().endswith("End")


def _scipy_optimum(m):
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    n = len(m.variables)
    c = np.zeros(n)
    for i, v in m.objective.items():
        c[i] = -v
    A = lil_matrix((len(m.constraints), n))
    lo = np.empty(len(m.constraints))
    hi = np.empty(len(m.constraints))
    for r, row in enumerate(m.constraints):
        for i, v in row.coefs:
            A[r, i] = v
        lo[r] = row.rhs if row.sense in ("=", ">=") else -np.inf
        hi[r] = row.rhs if row.sense in ("=", "<=") else np.inf
    integrality = np.array([1 if v.kind == BINARY else 0 for v in m.variables])
    bounds = Bounds([v.lb for v in m.variables], [v.ub for v in m.variables])
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo, hi), integrality=integrality, bounds=bounds)
    assert res.success
    return -res.fun


@pytest.mark.parametrize("seed", range(6))
def test_scipy_milp_agrees_on_model(seed):
    pytest.importorskip("scipy")
    rng = random.Random(seed)
    g, f, m = setup(3, 3, 6, rng=rng, D=1 + seed % 2)
    assert math.isclose(_scipy_optimum(m), solve(m).objective, abs_tol=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_highs_agrees_on_exported_lp(seed, tmp_path):
    highspy = pytest.importorskip("highspy")
    rng = random.Random(100 + seed)
    g, f, m = setup(3, 3, 6, rng=rng, D=1 + seed % 2)
    path = tmp_path / "m.lp"
    path.write_text(export_lp(m))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    assert h.getNumRow() == len(m.constraints)
    assert h.getNumCol() == len(m.variables)
    h.run()
    assert math.isclose(h.getInfo().objective_function_value, solve(m).objective, abs_tol=1e-6)


def test_limit_before_first_incumbent_still_returns_a_path():
    rng = random.Random(5)
    g, f, m = setup(5, 5, 12, rng=rng, D=2)
    sol = solve(m, SolverConfig(node_limit=1))
    assert not sol.optimal
    check_solution(m, sol)
