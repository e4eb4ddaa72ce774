"""Qubit mapping, UCCSD ansatz, VQE and quantum-resource estimates."""

from mifno.qubit.hamiltonian import QubitHamiltonian, hamiltonian_to_qubit
from mifno.qubit.pauli import PauliSum, PauliTerm, jordan_wigner
from mifno.qubit.statevector import basis_state, expectation, trotter_state
from mifno.qubit.uccsd import UccsdAmplitudes, mp1_amplitudes, uccsd_generator
from mifno.qubit.vqe import VqeOptions, VqeOutcome, solve_increment_vqe, vqe_minimize

__all__ = [
    "QubitHamiltonian", "hamiltonian_to_qubit", "PauliSum", "PauliTerm", "jordan_wigner",
    "basis_state", "expectation", "trotter_state", "UccsdAmplitudes", "mp1_amplitudes",
    "uccsd_generator", "VqeOptions", "VqeOutcome", "solve_increment_vqe", "vqe_minimize",
]
