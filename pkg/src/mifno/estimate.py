"""Qubit-count tables over a ladder of FNO occupancy thresholds, without solving."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mifno.integrals import IntegralStore, fold_spatial
from mifno.mp2_fno import fno_decompose, occupancy_prefix, vv_density
from mifno.qubit.resources import estimate_qubits

DEFAULT_LADDER = (0.9, 0.95, 0.99, 0.995, 0.999)


@dataclass(frozen=True)
class EstimateRow:
    label: str
    n_virtual: int
    fno_qubits: int
    mi_qubits: int


@dataclass(frozen=True)
class EstimateTable:
    n_occ: int
    order: int
    n_virtual_total: int | None
    rows: tuple

    def to_dict(self) -> dict:
        return {
            "n_occ": self.n_occ,
            "order": self.order,
            "n_virtual_total": self.n_virtual_total,
            "rows": [r.__dict__ for r in self.rows],
        }

    def render(self) -> str:
        lines = [f"N_occ = {self.n_occ}, MI({self.order})",
                 f"{'threshold':<12}{'N_v':>8}{'FNO qubits':>14}{'MI(' + str(self.order) + ')-FNO qubits':>22}"]
        for r in self.rows:
            lines.append(f"{r.label:<12}{r.n_virtual:>8}{r.fno_qubits:>14}{r.mi_qubits:>22}")
        return "\n".join(lines) + "\n"


def _row(label: str, n_occ: int, order: int, n_v: int) -> EstimateRow:
    return EstimateRow(label, n_v, estimate_qubits(n_occ, n_v), estimate_qubits(min(order, n_occ), n_v))


def spectrum_from_store(store: IntegralStore, frozen_core: int = 0) -> np.ndarray:
    """Spatial FNO occupations of the whole system, descending."""
    ham = fold_spatial(store, range(frozen_core), list(range(frozen_core, store.n_spatial)))
    block = vv_density(ham, ham.occ_spin_orbitals(), ham.virt_spin_orbitals())
    return fno_decompose(block).spatial_eigenvalues()


def estimate_only(n_occ: int, order: int, *, eigenvalues=None, n_virtual: dict | None = None,
                  thresholds=DEFAULT_LADDER) -> EstimateTable:
    """Qubit counts 2(N_v + N_occ) for FNO alone and 2(N_v + n) for MI(n)-FNO.

    Either give the FNO occupation spectrum (N_v per threshold is the
    shortest prefix holding that fraction) or explicit ``{label: N_v}``
    counts. A ``full`` row with every virtual is always included when the
    total is known.
    """
    if n_occ < 1 or order < 1:
        raise ValueError("n_occ and order must be positive")
    rows = []
    total = None
    if eigenvalues is not None:
        w = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
        total = len(w)
        for tau in thresholds:
            n_v = total if tau >= 1.0 else occupancy_prefix(w, tau)
            rows.append(_row(f"{100 * tau:g}%", n_occ, order, n_v))
    for label, n_v in (n_virtual or {}).items():
        if label == "full":
            total = int(n_v)
            continue
        rows.append(_row(str(label), n_occ, order, int(n_v)))
    if total is not None:
        rows.append(_row("full", n_occ, order, total))
    return EstimateTable(n_occ, order, total, tuple(rows))
