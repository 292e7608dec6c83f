"""Run reports: the JSON artifact every CLI command writes.

A report carries the full measure (atoms plus stderr), the derived
subset tables, the sampling configuration, and any warnings. Numbers are
serialized as shortest round-trip doubles, so serialize -> parse ->
serialize is byte-identical; golden tests freeze the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    ExplanationMeasure,
    Provenance,
    measure_interaction,
    shapley_from_measure,
    totals_from_measure,
)
from .errors import ParseError, XfvarError


def subset_key(names, mask: int) -> str:
    """Report key for a variable subset: declaration-ordered names joined
    by '+', empty string for the empty set."""
    return "+".join(n for j, n in enumerate(names) if mask & (1 << j))


@dataclass
class RunReport:
    measure: ExplanationMeasure
    config: dict = field(default_factory=dict)
    warnings: tuple = ()
    outcome: str | None = None
    extra_tables: dict = field(default_factory=dict)


def _mask_table(names, values) -> dict:
    return {subset_key(names, s): float(values[s]) for s in range(len(values))}


def _nonempty_table(names, values) -> dict:
    return {subset_key(names, s): float(values[s]) for s in range(1, len(values))}


def report_to_json(rep: RunReport) -> dict:
    m = rep.measure
    names = m.names
    totals = totals_from_measure(m)
    inter = np.array([measure_interaction(m, s) for s in range(1 << m.var_count)])
    sh = shapley_from_measure(m)
    prov = m.provenance
    out = {
        "variables": list(names),
        "outcome": rep.outcome,
        "atoms": _mask_table(names, m.atom_mass),
    }
    if m.atom_stderr is not None:
        out["atom_stderr"] = _mask_table(names, m.atom_stderr)
    out["totals"] = _nonempty_table(names, totals.total)
    out["interactions"] = _nonempty_table(names, inter)
    for key, table in rep.extra_tables.items():
        out[key] = table
    out["shapley"] = {n: float(v) for n, v in zip(names, sh.values)}
    out["samples"] = prov.samples
    out["seed"] = prov.seed
    out["provenance"] = prov.to_json()
    out["config"] = rep.config
    out["warnings"] = list(rep.warnings)
    return out


def report_from_json(obj) -> RunReport:
    if not isinstance(obj, dict):
        raise XfvarError("report must be a JSON object")
    for key in ("variables", "atoms", "provenance"):
        if key not in obj:
            raise XfvarError(f"report is missing {key!r}")
    names = tuple(str(n) for n in obj["variables"])
    n = 1 << len(names)
    atoms = np.zeros(n)
    for s in range(n):
        key = subset_key(names, s)
        if key not in obj["atoms"]:
            raise XfvarError(f"report atoms are missing subset {key!r}")
        atoms[s] = float(obj["atoms"][key])
    stderr = None
    if "atom_stderr" in obj:
        stderr = np.array(
            [float(obj["atom_stderr"][subset_key(names, s)]) for s in range(n)]
        )
    prov = Provenance.from_json(obj["provenance"])
    measure = ExplanationMeasure(names, atoms, stderr, prov)
    return RunReport(
        measure,
        config=dict(obj.get("config", {})),
        warnings=tuple(obj.get("warnings", ())),
        outcome=obj.get("outcome"),
    )


def dumps_report(rep: RunReport) -> str:
    return json.dumps(report_to_json(rep), indent=2, allow_nan=False) + "\n"


def write_report(rep: RunReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_report(rep))


def read_report(path) -> RunReport:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid report file: {e.msg}", e.pos) from None
    return report_from_json(obj)


def _fmt_pm(v, se):
    if se is None:
        return f"{v:9.3f}"
    return f"{v:9.3f} +- {se:.3f}"


def format_table(rep: RunReport) -> str:
    """Human-readable aligned rendering, rounded to 3 decimals."""
    m = rep.measure
    names = m.names
    totals = totals_from_measure(m)
    sh = shapley_from_measure(m)
    width = max([len(subset_key(names, s)) for s in range(1 << m.var_count)] + [8])
    lines = []
    lines.append("variables: " + ", ".join(names))
    prov = m.provenance
    if prov.kind == "monte_carlo":
        lines.append(f"estimate:  monte carlo, {prov.samples} pairs, seed {prov.seed}")
    else:
        lines.append("estimate:  exact enumeration")
    if prov.flags:
        lines.append("flags:     " + ", ".join(prov.flags))
    lines.append("")
    lines.append(f"{'atom':<{width}}  {'mass':>9}")
    for s in range(1 << m.var_count):
        label = subset_key(names, s) or "(none)"
        se = None if m.atom_stderr is None else m.atom_stderr[s]
        lines.append(f"{label:<{width}}  {_fmt_pm(m.atom_mass[s], se)}")
    lines.append("")
    lines.append(f"{'subset':<{width}}  {'total':>9}")
    for s in range(1, 1 << m.var_count):
        lines.append(f"{subset_key(names, s):<{width}}  {totals.total[s]:9.3f}")
    lines.append("")
    lines.append(f"{'variable':<{width}}  {'shapley':>9}")
    for n, v in zip(names, sh.values):
        lines.append(f"{n:<{width}}  {v:9.3f}")
    for w in rep.warnings:
        lines.append("")
        lines.append("warning: " + w)
    return "\n".join(lines) + "\n"
