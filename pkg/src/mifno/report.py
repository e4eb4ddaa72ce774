"""Run reports: JSON (schema v1) and a fixed-width resource table.

The report is a pure function of the configuration and the ledgered
energies. Wall times and worker counts stay in the ledger so that reports
compare byte for byte across worker counts and across resumed runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from mifno.increments import SCREENED, Increment, increments_of_order
from mifno.qubit.resources import GATE_MODEL, estimate_gates

SCHEMA = "mifno.run-report/1"
GATE_CAVEAT = ("gate counts follow the pauli-ladder-v1 model: an upper-bound proxy for one "
               "first-order Trotter step, not compiled circuit counts")


@dataclass
class RunReport:
    status: str
    config: dict
    e_hf: float
    e_mp2_corr: float
    increments: list = field(default_factory=list)
    expansions: dict = field(default_factory=dict)
    missing: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    full_system: dict = field(default_factory=dict)
    max_qubits_over_increments: int = 0
    schema: str = SCHEMA
    gate_model: str = GATE_MODEL
    gate_caveat: str = GATE_CAVEAT
    trotter_steps: int = 1

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "status": self.status,
            "gate_model": self.gate_model,
            "gate_caveat": self.gate_caveat,
            "trotter_steps": self.trotter_steps,
            "config": self.config,
            "e_hf": self.e_hf,
            "e_mp2_corr": self.e_mp2_corr,
            "full_system": self.full_system,
            "max_qubits_over_increments": self.max_qubits_over_increments,
            "increments": self.increments,
            "expansions": self.expansions,
            "missing": self.missing,
            "failures": self.failures,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        keys = ("status", "config", "e_hf", "e_mp2_corr", "increments", "expansions", "missing",
                "failures", "full_system", "max_qubits_over_increments", "gate_model",
                "gate_caveat", "trotter_steps")
        return cls(**{k: d[k] for k in keys if k in d})

    @property
    def e_total(self) -> dict:
        return {sv: x["e_total"] for sv, x in self.expansions.items()}


def reduction(part: int, full: int) -> float:
    return 100.0 * (1.0 - part / full) if full else 0.0


def full_system_estimate(ctx) -> dict:
    res = estimate_gates(ctx.full_hamiltonian())
    return {
        "n_occupied": len(ctx.correlated),
        "n_virtual": len(ctx.virtuals),
        "n_qubits": res.n_qubits,
        "one_qubit_gates": res.one_qubit_gates,
        "two_qubit_gates": res.two_qubit_gates,
        "n_pauli_terms_hamiltonian": res.n_pauli_terms_hamiltonian,
        "n_variational_parameters": res.n_variational_parameters,
    }


_COPY = ("orbitals", "n_occupied", "n_kept_virtual", "n_discarded_virtual", "occupancy_fraction",
         "delta_mp2")


def build_report(state) -> RunReport:
    ctx = state.ctx
    cfg = ctx.cfg
    full = full_system_estimate(ctx)
    rows = []
    for m in range(1, cfg.order + 1):
        for s in increments_of_order(ctx.n_expansion, m):
            row = {"subset": list(s), "order": m, "label": s.label()}
            recs = [state.records.get((s, sv)) for sv in cfg.solvers]
            primary = state.ledgers[cfg.solvers[0]]
            if primary.status.get(s) == SCREENED:
                row["status"] = "screened"
                row["energies"] = {sv: {"e_c": None, "eps": 0.0} for sv in cfg.solvers}
                rows.append(row)
                continue
            if any(r is None for r in recs):
                row["status"] = "failed"
                row["error"] = state.failures.get(Increment(s))
                rows.append(row)
                continue
            first = recs[0]
            row["status"] = "solved"
            row.update({k: first[k] for k in _COPY})
            res = first["resources"]
            row["resources"] = res
            row["reduction_pct"] = {
                "qubits": reduction(res["n_qubits"], full["n_qubits"]),
                "one_qubit_gates": reduction(res["one_qubit_gates"], full["one_qubit_gates"]),
                "two_qubit_gates": reduction(res["two_qubit_gates"], full["two_qubit_gates"]),
            }
            energies = {}
            for sv, r in zip(cfg.solvers, recs):
                e = {"e_c": r["e_c"], "e_solver": r["e_solver"],
                     "eps": state.ledgers[sv].eps.get(s)}
                if "iterations" in r:
                    e["iterations"] = r["iterations"]
                    e["converged"] = r["converged"]
                energies[sv] = e
            row["energies"] = energies
            rows.append(row)
    expansions = {}
    for sv, x in state.expansions.items():
        expansions[sv] = {
            "n": x.n,
            "e_corr": x.e_corr,
            "e_total": x.e_total,
            "per_order_sums": {str(k): v for k, v in sorted(x.per_order_sums.items())},
        }
    qubits = [r["resources"]["n_qubits"] for r in rows if "resources" in r]
    return RunReport(
        status="complete" if not state.missing else "partial",
        config={
            "fcidump": Path(cfg.fcidump_path).name,
            "order": cfg.order,
            "fno_policy": cfg.policy_tag,
            "fno_scope": cfg.fno_scope,
            "solver": cfg.solver,
            "vqe_backend": cfg.vqe_backend if "vqe_uccsd" in cfg.solvers else None,
            "screen_threshold": cfg.screen_threshold,
            "frozen_core": cfg.frozen_core,
        },
        e_hf=ctx.e_hf,
        e_mp2_corr=ctx.e_mp2,
        increments=rows,
        expansions=expansions,
        missing=state.missing,
        failures={",".join(map(str, s)): e for s, e in sorted(state.failures.items())},
        full_system=full,
        max_qubits_over_increments=max(qubits, default=0),
    )


# ---------------------------------------------------------------------------
# rendering


def to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def from_json(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def _cell(value: int, pct: float) -> str:
    return f"{value} ({pct:.1f}%)"


def render_table(report: RunReport) -> str:
    cfg = report.config
    solvers = list(report.expansions) or ([] if cfg.get("solver") is None else
                                          (["fci", "vqe_uccsd"] if cfg["solver"] == "both" else [cfg["solver"]]))
    lines = [
        f"MI({cfg.get('order')})  fcidump={cfg.get('fcidump')}  solver={cfg.get('solver')}  "
        f"fno={cfg.get('fno_policy')}  status={report.status}",
        f"E_HF = {report.e_hf:.10f}   E_MP2(corr) = {report.e_mp2_corr:.10f}",
        f"note: {report.gate_caveat}",
        "",
    ]
    head = f"{'Increment':<22}{'Qubits':>14}{'1q gates':>18}{'2q gates':>18}{'kept/disc':>11}"
    for sv in solvers:
        head += f"{'E_c ' + sv:>20}{'eps ' + sv:>20}"
    lines += [head, "-" * len(head)]
    for row in report.increments:
        if row["status"] != "solved":
            lines.append(f"{row['label']:<22}{row['status']:>14}")
            continue
        res, pct = row["resources"], row["reduction_pct"]
        line = (f"{row['label']:<22}{_cell(res['n_qubits'], pct['qubits']):>14}"
                f"{_cell(res['one_qubit_gates'], pct['one_qubit_gates']):>18}"
                f"{_cell(res['two_qubit_gates'], pct['two_qubit_gates']):>18}"
                f"{row['n_kept_virtual']:>5}/{row['n_discarded_virtual']:<5}")
        for sv in solvers:
            e = row["energies"].get(sv, {})
            eps = e.get("eps")
            line += f"{e.get('e_c', float('nan')):>20.10f}"
            line += f"{eps:>20.10f}" if eps is not None else f"{'-':>20}"
        lines.append(line)
    full = report.full_system
    if full:
        lines.append("-" * len(head))
        lines.append(f"{'Full system':<22}{full['n_qubits']:>14}{full['one_qubit_gates']:>18}"
                     f"{full['two_qubit_gates']:>18}")
    lines.append("")
    lines.append(f"max qubits over increments: {report.max_qubits_over_increments}")
    for sv, x in report.expansions.items():
        lines.append(f"{sv}: E_corr = {x['e_corr']:.10f}   E_total = {x['e_total']:.10f}")
    for sv, miss in report.missing.items():
        lines.append(f"{sv}: incomplete, missing {len(miss)} increments")
    return "\n".join(lines) + "\n"


def render(report: RunReport, fmt: str = "json") -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "table":
        return render_table(report)
    raise ValueError(f"unknown report format {fmt!r}")
