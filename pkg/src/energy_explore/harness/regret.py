"""Regret of the online planner against the full-information baseline."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from ..milp import SolverConfig
from ..planner import run_eisp
from ..world import Scenario
from .baseline import full_info_baseline


@dataclass
class RegretRow:
    case: int
    instance: int
    grid: str
    E: int
    nu: int
    fi_reward: Fraction
    nii_reward: Fraction
    fi_serviced: int
    nii_serviced: int
    fi_optimal: bool = True

    @property
    def regret(self) -> Fraction:
        return self.fi_reward - self.nii_reward


@dataclass
class RegretReport:
    rows: list[RegretRow] = field(default_factory=list)

    COLUMNS = (
        "Case No.", "Instance", "Grid Size", "E", "No. of targets present",
        "Targets serviced F.I.", "Targets serviced N.I.I.", "Reward F.I.", "Reward N.I.I.", "Regret",
    )

    def __len__(self) -> int:
        return len(self.rows)

    def _mean(self, attr: str) -> float:
        if not self.rows:
            return 0.0
        return float(sum((Fraction(getattr(r, attr)) for r in self.rows), Fraction(0)) / len(self.rows))

    @property
    def mean_regret(self) -> float:
        return self._mean("regret")

    @property
    def mean_fi_serviced(self) -> float:
        return self._mean("fi_serviced")

    @property
    def mean_nii_serviced(self) -> float:
        return self._mean("nii_serviced")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([r.case, r.instance, r.grid, r.E, r.nu, r.fi_serviced, r.nii_serviced,
                        repr(float(r.fi_reward)), repr(float(r.nii_reward)), repr(float(r.regret))])
        # one summary row per case
        for case in sorted({r.case for r in self.rows}):
            sub = RegretReport([r for r in self.rows if r.case == case])
            first = sub.rows[0]
            w.writerow([case, "mean", first.grid, first.E, repr(sub._mean("nu")),
                        repr(sub.mean_fi_serviced), repr(sub.mean_nii_serviced),
                        repr(sub._mean("fi_reward")), repr(sub._mean("nii_reward")), repr(sub.mean_regret)])
        return buf.getvalue()


def _evaluate_one(args) -> RegretRow:
    case, i, sc, config = args
    fi = full_info_baseline(sc)
    tr = run_eisp(sc, config=config)
    nu = sum(1 for _, s in sc.planted if s in sc.targets)
    return RegretRow(
        case=case, instance=i, grid=f"{sc.grid.height}x{sc.grid.width}", E=sc.budget, nu=nu,
        fi_reward=fi.reward, nii_reward=Fraction(tr.footer["R_serv"]),
        fi_serviced=len(fi.serviced), nii_serviced=len(tr.footer["serviced"]), fi_optimal=fi.optimal,
    )


def evaluate_regret(
    batch: list[Scenario], case: int = 1, config: SolverConfig | None = None, workers: int = 1
) -> RegretReport:
    """FI minus serviced NII reward for every instance; only servicing rewards count."""
    jobs = [(case, i, sc, config) for i, sc in enumerate(batch)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_evaluate_one, jobs))
    else:
        rows = [_evaluate_one(j) for j in jobs]
    return RegretReport(rows)
