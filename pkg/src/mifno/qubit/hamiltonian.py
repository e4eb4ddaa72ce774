from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mifno.errors import CapacityError
from mifno.integrals import ActiveSpaceHamiltonian, antisym_block
from mifno.qubit.pauli import PauliSum, jordan_wigner

# Largest register simulated as a dense statevector.
MAX_STATEVECTOR_QUBITS = 24
COEFF_TOL = 1e-12


@dataclass(frozen=True)
class QubitHamiltonian:
    paulis: PauliSum
    n_qubits: int

    @property
    def n_terms(self) -> int:
        return len(self.paulis)

    def to_dense(self) -> np.ndarray:
        return self.paulis.to_dense(self.n_qubits)


def fermion_terms(ham: ActiveSpaceHamiltonian):
    """Second-quantised H as ``(coeff, ladder ops)`` over interleaved spin orbitals.

    Two-body part written as sum_{P<Q, R<S} <PQ||RS> a+_P a+_Q a_S a_R.
    """
    n = 2 * ham.n_orbitals
    so = np.arange(n)
    h1 = np.kron(ham.eff_h1, np.eye(2))
    for P, Q in zip(*np.nonzero(np.abs(h1) > COEFF_TOL)):
        yield float(h1[P, Q]), ((int(P), True), (int(Q), False))
    if n < 2:
        return
    g = antisym_block(ham.h2_active, so, so, so, so)
    iu = np.triu_indices(n, 1)
    block = g[iu[0], iu[1]][:, iu[0], iu[1]]
    for a, b in zip(*np.nonzero(np.abs(block) > COEFF_TOL)):
        P, Q, R, S = int(iu[0][a]), int(iu[1][a]), int(iu[0][b]), int(iu[1][b])
        yield float(block[a, b]), ((P, True), (Q, True), (S, False), (R, False))


def hamiltonian_to_qubit(ham: ActiveSpaceHamiltonian, estimation_only: bool = False) -> QubitHamiltonian:
    """Jordan-Wigner image of an active-space Hamiltonian, core energy on the identity."""
    nq = 2 * ham.n_orbitals
    if nq > MAX_STATEVECTOR_QUBITS and not estimation_only:
        raise CapacityError(f"{nq} qubits exceeds the statevector cap of {MAX_STATEVECTOR_QUBITS}")
    paulis = PauliSum.identity(ham.eff_core) + jordan_wigner(fermion_terms(ham))
    paulis = PauliSum({k: complex(c).real for k, c in paulis.simplify().items()})
    return QubitHamiltonian(paulis.simplify(), nq)
