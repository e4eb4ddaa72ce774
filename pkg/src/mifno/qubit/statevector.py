"""Dense statevector simulation of Pauli exponentials and expectation values."""

from __future__ import annotations

import numpy as np

from mifno.errors import CapacityError, ShapeError
from mifno.qubit.hamiltonian import MAX_STATEVECTOR_QUBITS, QubitHamiltonian
from mifno.qubit.pauli import PauliSum

_I_POW = np.array([1, 1j, -1, -1j])


def _check(n_qubits: int) -> None:
    if n_qubits > MAX_STATEVECTOR_QUBITS:
        raise CapacityError(f"{n_qubits} qubits exceeds the statevector cap of {MAX_STATEVECTOR_QUBITS}")


def basis_state(n_qubits: int, occupied) -> np.ndarray:
    _check(n_qubits)
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[sum(1 << q for q in occupied)] = 1.0
    return psi


def apply_pauli(psi: np.ndarray, key: tuple) -> np.ndarray:
    x, z = key
    idx = np.arange(psi.size, dtype=np.int64)
    src = idx ^ x
    sign = 1 - 2 * (np.bitwise_count(src & z).astype(np.int64) & 1)
    return _I_POW[bin(x & z).count("1") % 4] * sign * psi[src]


def trotter_state(generator: PauliSum, reference: np.ndarray) -> np.ndarray:
    """prod_k exp(g_k P_k) |reference> for an anti-Hermitian generator sum_k g_k P_k.

    Factors act in the generator's term order (first term applied first);
    each ``g_k`` must be purely imaginary.
    """
    _check(int(reference.size).bit_length() - 1)
    psi = np.array(reference, dtype=complex)
    for key, g in generator.items():
        g = complex(g)
        if abs(g.real) > 1e-12:
            raise ValueError("generator term is not anti-Hermitian")
        c = g.imag
        psi = np.cos(c) * psi + 1j * np.sin(c) * apply_pauli(psi, key)
    return psi


def expectation(psi: np.ndarray, qham: QubitHamiltonian) -> float:
    if psi.size != 1 << qham.n_qubits:
        raise ShapeError(f"state of size {psi.size} for {qham.n_qubits} qubits")
    total = 0.0
    for key, c in qham.paulis.items():
        total += c * np.vdot(psi, apply_pauli(psi, key))
    return float(np.real(total))
