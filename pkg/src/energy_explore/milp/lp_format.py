"""CPLEX-LP text export of a :class:`MilpModel` for cross-checks with external solvers."""

from __future__ import annotations

import math

from .model import BINARY, MilpModel

_SENSE = {"=": "=", "<=": "<=", ">=": ">="}


def _num(v: float) -> str:
    if v == 0:
        v = 0.0  # no negative zero
    return format(v, ".17g")


def export_lp(model: MilpModel) -> str:
    names = [v.name for v in model.variables]

    def render(coefs, wrap: bool = False) -> str:
        out = []
        line = ""
        for idx, c in coefs:
            term = f" {'+' if c >= 0 else '-'} {_num(abs(c))} {names[idx]}"
            if wrap and len(line) + len(term) > 200:
                out.append(line)
                line = " "
            line += term
        out.append(line)
        return "\n".join(out)

    lines = [
        "\\ max-reward path model over the pruned product graph",
        f"\\ variables: {len(model.variables)} ({model.n_binary} binary, {model.n_continuous} continuous)",
        f"\\ constraints: {len(model.constraints)}",
        "Maximize",
    ]
    lines.append(" obj:" + render(sorted(model.objective.items()), wrap=True))
    lines.append("Subject To")
    for row in model.constraints:
        # LP format needs at least one term; a zero-weight variable stands in
        body = render(row.coefs) if row.coefs else f" 0 {names[0]}"
        lines.append(f" {row.name}:{body} {_SENSE[row.sense]} {_num(row.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        if math.isinf(v.lb) and math.isinf(v.ub):
            lines.append(f" {v.name} free")
        else:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    lines.append("Binaries")
    bins = [v.name for v in model.variables if v.kind == BINARY]
    for i in range(0, len(bins), 8):
        lines.append(" " + " ".join(bins[i:i + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"
