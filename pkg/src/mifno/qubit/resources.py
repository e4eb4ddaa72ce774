"""Qubit and gate-count estimates for Trotterised UCCSD circuits.

Gate model ``pauli-ladder-v1``: the exponential of one Pauli string of
weight ``w`` with ``n_xy`` X or Y factors is compiled as a basis change on
each X/Y qubit, a CNOT ladder onto the last qubit, one Z rotation, and the
mirrored ladder and basis change. That is ``2 (w - 1)`` two-qubit gates and
``2 n_xy + 1`` one-qubit gates. No cancellation between neighbouring
exponentials is attempted, so the totals are an upper-bound proxy rather
than compiled counts.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from mifno.integrals import ActiveSpaceHamiltonian
from mifno.qubit.hamiltonian import MAX_STATEVECTOR_QUBITS, hamiltonian_to_qubit
from mifno.qubit.uccsd import UccsdAmplitudes, mp1_amplitudes

GATE_MODEL = "pauli-ladder-v1"


def estimate_qubits(n_occ_active: int, n_virt_kept: int) -> int:
    """Jordan-Wigner register size for a closed-shell active space of spatial orbitals."""
    if n_occ_active < 0 or n_virt_kept < 0:
        raise ValueError("orbital counts must be non-negative")
    return 2 * (n_occ_active + n_virt_kept)


def pauli_exponential_cost(ops: dict) -> tuple[int, int]:
    """(one-qubit, two-qubit) gates for exp(i c P) with P given as {qubit: 'X'|'Y'|'Z'}."""
    w = len(ops)
    if w == 0:
        return 0, 0
    n_xy = sum(1 for p in ops.values() if p != "Z")
    return 2 * n_xy + 1, 2 * (w - 1)


@dataclass(frozen=True)
class ResourceEstimate:
    n_qubits: int
    one_qubit_gates: int
    two_qubit_gates: int
    n_pauli_terms_hamiltonian: int
    n_variational_parameters: int
    gate_model: str = GATE_MODEL

    def to_dict(self) -> dict:
        return asdict(self)


def excitation_gate_counts(exc: tuple) -> tuple[int, int]:
    """Gate totals for the Jordan-Wigner exponentials of one excitation.

    With the touched modes sorted as ``p1 < p2 (< p3 < p4)`` a single maps
    to 2 strings carrying X/Y on its two modes and Z strictly between them;
    a double maps to 8 strings carrying X/Y on its four modes and Z on the
    open intervals (p1, p2) and (p3, p4).
    """
    p = sorted(exc)
    if len(p) == 2:
        n_terms, w, n_xy = 2, p[1] - p[0] + 1, 2
    elif len(p) == 4:
        n_terms, w, n_xy = 8, 4 + (p[1] - p[0] - 1) + (p[3] - p[2] - 1), 4
    else:
        raise ValueError(f"not a single or double excitation: {exc}")
    return n_terms * (2 * n_xy + 1), n_terms * 2 * (w - 1)


def ansatz_gate_counts(amps: UccsdAmplitudes) -> tuple[int, int]:
    """Gate totals over every Pauli exponential of one Trotter step.

    Counts follow the ansatz structure only; the current amplitude values
    do not matter.
    """
    one = two = 0
    for exc in amps.excitations():
        a, b = excitation_gate_counts(exc)
        one += a
        two += b
    return one, two


def estimate_gates(ham: ActiveSpaceHamiltonian, amps: UccsdAmplitudes | None = None,
                   count_hamiltonian: bool | None = None) -> ResourceEstimate:
    """Resource estimate for one increment's UCCSD circuit under ``pauli-ladder-v1``.

    The Hamiltonian's Pauli terms are counted by building its Jordan-Wigner
    image, by default only up to the statevector cap; beyond it the count
    is reported as -1.
    """
    amps = amps if amps is not None else mp1_amplitudes(ham)
    one, two = ansatz_gate_counts(amps)
    if count_hamiltonian is None:
        count_hamiltonian = 2 * ham.n_orbitals <= MAX_STATEVECTOR_QUBITS
    n_terms = hamiltonian_to_qubit(ham, estimation_only=True).n_terms if count_hamiltonian else -1
    return ResourceEstimate(
        n_qubits=estimate_qubits(ham.n_occupied, ham.n_virtual),
        one_qubit_gates=one,
        two_qubit_gates=two,
        n_pauli_terms_hamiltonian=n_terms,
        n_variational_parameters=len(amps),
    )
