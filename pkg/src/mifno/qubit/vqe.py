"""Variational minimisation of the Trotterised UCCSD energy.

Two interchangeable backends evaluate the same objective:

``statevector``
    builds the Jordan-Wigner Hamiltonian and generator and applies each
    Pauli exponential to a 2**n amplitude register.
``subspace``
    applies each excitation's exponential exp(theta (tau - tau^dagger)) as
    an exact Givens rotation between determinant pairs of the
    particle-number sector and evaluates the energy with the FCI sigma
    routine. The Pauli terms of one excitation commute, so this equals the
    statevector product factor by factor; it is just much cheaper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from mifno.fci import DeterminantSpace, sigma_apply
from mifno.integrals import ActiveSpaceHamiltonian
from mifno.qubit.hamiltonian import hamiltonian_to_qubit
from mifno.qubit.statevector import basis_state, expectation, trotter_state
from mifno.qubit.uccsd import UccsdAmplitudes, mp1_amplitudes, uccsd_generator


@dataclass(frozen=True)
class VqeOptions:
    rhobeg: float = 1e-2
    tol: float = 1e-5
    maxiter: int = 50_000
    backend: str = "subspace"


@dataclass
class VqeOutcome:
    energy: float
    amplitudes: UccsdAmplitudes
    iterations: int
    converged: bool


class SubspaceAnsatz:
    """Trotterised UCCSD state on the determinant basis of ``ham``."""

    def __init__(self, ham: ActiveSpaceHamiltonian, excitations):
        self.ham = ham
        self.space = DeterminantSpace.for_hamiltonian(ham)
        n = ham.n_orbitals
        dets = self.space.dets
        self.rotations = []
        for exc in excitations:
            if len(exc) == 2:
                i, a = exc
                ops = [(a, True), (i, False)]
            else:
                i, j, a, b = exc
                ops = [(a, True), (b, True), (j, False), (i, False)]
            cur = dets.copy()
            sign = np.ones(dets.size, dtype=np.int64)
            ok = np.ones(dets.size, dtype=bool)
            for P, create in reversed(ops):
                m = np.int64(1) << np.int64(P // 2 + (P % 2) * n)
                ok &= ((cur & m) != 0) != create
                sign *= 1 - 2 * (np.bitwise_count(cur & (m - 1)).astype(np.int64) & 1)
                cur ^= m
            src = np.flatnonzero(ok)
            self.rotations.append((src, self.space.det_index(cur[src]), sign[src].astype(float)))

    def state(self, theta) -> np.ndarray:
        c = self.space.hf_vector()
        for (src, dst, sg), t in zip(self.rotations, theta):
            if t == 0.0:
                continue
            cs, ct = c[src], c[dst]
            co, si = np.cos(t), np.sin(t)
            c[src] = co * cs - si * sg * ct
            c[dst] = co * ct + si * sg * cs
        return c

    def energy(self, theta) -> float:
        c = self.state(theta)
        return float(c @ sigma_apply(self.ham, self.space, c))


class StatevectorAnsatz:
    def __init__(self, ham: ActiveSpaceHamiltonian, amps: UccsdAmplitudes):
        self.qham = hamiltonian_to_qubit(ham)
        self.template = amps
        self.reference = basis_state(self.qham.n_qubits, ham.occ_spin_orbitals())

    def state(self, theta) -> np.ndarray:
        return trotter_state(uccsd_generator(self.template.with_vector(theta)), self.reference)

    def energy(self, theta) -> float:
        return expectation(self.state(theta), self.qham)


def make_ansatz(ham, amps: UccsdAmplitudes, backend: str):
    if backend == "subspace":
        return SubspaceAnsatz(ham, amps.excitations())
    if backend == "statevector":
        return StatevectorAnsatz(ham, amps)
    raise ValueError(f"unknown VQE backend {backend!r}")


def vqe_minimize(ham: ActiveSpaceHamiltonian, init: UccsdAmplitudes | None = None,
                 opts: VqeOptions = VqeOptions()) -> VqeOutcome:
    """Minimise <psi(theta)|H|psi(theta)> with COBYLA from ``init`` (first-order guess by default)."""
    amps = init if init is not None else mp1_amplitudes(ham)
    amps.validate()
    ansatz = make_ansatz(ham, amps, opts.backend)
    x0 = amps.vector()
    if x0.size == 0:
        return VqeOutcome(ansatz.energy(x0), amps, 0, True)
    res = minimize(ansatz.energy, x0, method="COBYLA",
                   options={"rhobeg": opts.rhobeg, "tol": opts.tol, "maxiter": opts.maxiter})
    return VqeOutcome(float(res.fun), amps.with_vector(res.x), int(res.nfev), bool(res.success))


def solve_increment_vqe(ham: ActiveSpaceHamiltonian, opts: VqeOptions = VqeOptions()) -> float:
    """VQE-UCCSD correlation energy of an active space relative to its reference determinant."""
    if ham.n_virtual == 0 or ham.n_occupied == 0:
        return 0.0
    return vqe_minimize(ham, opts=opts).energy - ham.hf_energy()
