"""Command-line entry point: run, baseline, regret, bench, export-lp, export-dot."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .budget import InfeasibleBudget
from .harness import (
    DEFAULT_SIZES, SearchBudgetExceeded, evaluate_regret, full_info_baseline, generate_scenarios, run_bench,
)
from .milp import SolverConfig, export_lp
from .planner import Planner, StepRecord
from .product import InvariantViolation, construct_product_dag
from .tracking import InconsistentObservation
from .world import Scenario, ScenarioError, canonical_json, load_scenario, mars_document, read_document

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3

BUILTIN = {"mars": mars_document}


def _document(source: str) -> dict:
    if source in BUILTIN:
        return BUILTIN[source]()
    return read_document(source)


def _scenario(args, realise: bool = True) -> Scenario:
    sc = load_scenario(_document(args.scenario))
    if realise and sc.placement == "random":
        sc = generate_scenarios(sc, 1, args.seed if args.seed is not None else sc.seed)[0]
    return sc


def _config(args) -> SolverConfig:
    return SolverConfig(node_limit=args.node_limit, time_limit=args.time_limit)


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_run(args) -> int:
    sc = _scenario(args)
    p = Planner(sc, args.seed, _config(args), verify=args.verify, keep_fields=args.dump_rewards is not None)
    trace = p.run()
    _write(args.out, trace.to_jsonl())
    if args.dump_rewards is not None:
        d = Path(args.dump_rewards)
        d.mkdir(parents=True, exist_ok=True)
        for i, f in enumerate(p.fields):
            (d / f"rewards_{i:03d}.csv").write_text(f.to_csv())
    if args.stats is not None:
        with open(args.stats, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(StepRecord.COLUMNS)
            w.writerows(r.row() for r in p.stats)
    return EXIT_OK


def cmd_baseline(args) -> int:
    sc = _scenario(args)
    res = full_info_baseline(sc)
    doc = {
        "reward": float(res.reward),
        "path": [list(c) for c in res.path],
        "serviced": [list(c) for c in res.serviced],
        "energy_used": res.energy_used,
        "optimal": res.optimal,
    }
    _write(args.out, canonical_json(doc) + "\n")
    return EXIT_OK


def cmd_regret(args) -> int:
    doc = _document(args.scenario)
    doc["targets"]["placement"] = "random"
    if args.size is not None:
        doc["grid"].update(width=args.size[1], height=args.size[0])
    if args.goal is not None:
        doc["grid"]["goal"] = list(args.goal)
    if args.E is not None:
        doc["budget"]["E"] = args.E
    template = load_scenario(doc)
    seed = args.seed if args.seed is not None else template.seed
    batch = generate_scenarios(template, args.cases, seed, nu=args.nu)
    report = evaluate_regret(batch, case=args.case, config=_config(args), workers=args.workers)
    _write(args.out, report.to_csv())
    return EXIT_OK


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        n, _, e = item.partition(":")
        out.append((int(n), int(e)))
    return out


def cmd_bench(args) -> int:
    template = _document(args.scenario)
    report = run_bench(args.sizes, n_rem=args.n_rem, template=template, config=_config(args))
    _write(args.out, report.to_csv(timing=not args.no_timing))
    return EXIT_OK


def cmd_export_lp(args) -> int:
    sc = _scenario(args)
    model = Planner(sc, args.seed).prepare()
    _write(args.out, export_lp(model))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    sc = _scenario(args)
    E_eps = args.E_eps if args.E_eps is not None else Planner(sc, args.seed).allocation.E_eps
    g = construct_product_dag(sc.grid, E_eps, prune_dead_ends=args.prune)
    _write(args.out, g.to_dot())
    return EXIT_OK


def _cell_arg(text: str) -> tuple[int, int]:
    r, _, c = text.partition(",")
    return int(r), int(c)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="energy-explore",
        description="Energy-constrained exploration with incremental-resolution symbolic perception.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", default="mars", help="scenario YAML/JSON path or 'mars' (default)")
        p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--node-limit", type=int, default=None, help="branch-and-bound node limit per solve")
        p.add_argument("--time-limit", type=float, default=None,
                       help="seconds per solve; results may then depend on machine speed")

    p = sub.add_parser("run", help="one online exploration run; writes the JSONL trace")
    common(p)
    p.add_argument("--dump-rewards", metavar="DIR", default=None, help="write per-step reward grids as CSV")
    p.add_argument("--verify", action="store_true", help="cross-check every solve against path enumeration")
    p.add_argument("--stats", metavar="CSV", default=None, help="per-step solver statistics")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="full-information optimum for a scenario")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("regret", help="regret of the online planner over a random batch")
    common(p)
    p.add_argument("--cases", type=int, default=10, help="instances in the batch (default 10)")
    p.add_argument("--nu", type=int, default=None, help="condition on this many planted targets")
    p.add_argument("--case", type=int, default=1, help="case number written to the report")
    p.add_argument("--size", type=_cell_arg, default=None, metavar="ROWS,COLS", help="override grid size")
    p.add_argument("--goal", type=_cell_arg, default=None, metavar="ROW,COL", help="override goal cell")
    p.add_argument("--E", type=int, default=None, help="override the energy budget")
    p.add_argument("--workers", type=int, default=1, help="parallel processes (results are order-stable)")
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("bench", help="first-step model size and solve time per grid size")
    common(p)
    p.add_argument("--sizes", type=_sizes, default=list(DEFAULT_SIZES), metavar="N:E,...",
                   help="grid side and exploration energy pairs (default 4:11,5:13,6:16,7:18,8:20)")
    p.add_argument("--n-rem", type=int, default=3, help="remaining-target estimate for the reward field")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export-lp", help="write the first-step model in LP format")
    common(p)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("export-dot", help="write the product graph in Graphviz dot format")
    common(p)
    p.add_argument("--E-eps", dest="E_eps", type=int, default=None,
                   help="exploration energy (default: the run's sampled allocation)")
    p.add_argument("--prune", action="store_true", help="drop nodes that cannot reach the goal")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, InfeasibleBudget, SearchBudgetExceeded, OSError, ValueError) as exc:
        # ValueError also covers malformed YAML/JSON input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvariantViolation, InconsistentObservation) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
