"""Path-selection MILP: model construction, exact solver, brute-force oracle, LP export."""

from .bnb import MilpSolution, PathSearch, SolverConfig, SolverStats, assignment, solve
from .lp_format import export_lp
from .model import SINK, MilpModel, build_model
from .oracle import PathExplosion, oracle_solve

__all__ = [
    "SINK", "MilpModel", "MilpSolution", "PathExplosion", "PathSearch", "SolverConfig",
    "SolverStats", "assignment", "build_model", "export_lp", "oracle_solve", "solve",
]
