"""Evaluation harness: scenario batches, full-information baseline, regret, benchmarks."""

from .baseline import BaselineResult, SearchBudgetExceeded, full_info_baseline
from .bench import DEFAULT_SIZES, BenchReport, BenchRow, bench_document, run_bench
from .regret import RegretReport, RegretRow, evaluate_regret
from .scenarios import case_seed, generate_scenarios

__all__ = [
    "DEFAULT_SIZES", "BaselineResult", "BenchReport", "BenchRow", "RegretReport", "RegretRow",
    "SearchBudgetExceeded", "bench_document", "case_seed", "evaluate_regret",
    "full_info_baseline", "generate_scenarios", "run_bench",
]
