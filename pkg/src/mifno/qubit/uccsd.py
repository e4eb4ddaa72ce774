"""Unitary coupled-cluster singles and doubles over interleaved spin orbitals.

An amplitude ``theta`` on single ``(i, a)`` multiplies ``a+_a a_i``; on
double ``(i, j, a, b)`` with ``i < j`` and ``a < b`` it multiplies
``a+_a a+_b a_j a_i``. Every unique excitation appears once, so the
perturbative guess is ``<ij||ab> / (f_ii + f_jj - f_aa - f_bb)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from mifno.errors import InvalidAmplitude
from mifno.integrals import ActiveSpaceHamiltonian, antisym_block
from mifno.qubit.pauli import PauliSum, jordan_wigner

# doubles whose first-order amplitude is below this are symmetry-forbidden
SCREEN_TOL = 1e-10


@dataclass
class UccsdAmplitudes:
    singles: dict = field(default_factory=dict)
    doubles: dict = field(default_factory=dict)

    def excitations(self) -> list:
        """All excitations in application order: singles, then doubles, each sorted."""
        return sorted(self.singles) + sorted(self.doubles)

    def vector(self) -> np.ndarray:
        return np.array([self.singles[e] for e in sorted(self.singles)]
                        + [self.doubles[e] for e in sorted(self.doubles)], dtype=float)

    def with_vector(self, theta) -> "UccsdAmplitudes":
        theta = list(map(float, theta))
        ns = len(self.singles)
        return UccsdAmplitudes(dict(zip(sorted(self.singles), theta[:ns])),
                               dict(zip(sorted(self.doubles), theta[ns:])))

    def __len__(self) -> int:
        return len(self.singles) + len(self.doubles)

    def validate(self) -> None:
        for i, a in self.singles:
            if i == a:
                raise InvalidAmplitude(f"single ({i},{a}) annihilates and creates the same mode")
        for i, j, a, b in self.doubles:
            if not (i < j and a < b):
                raise InvalidAmplitude(f"double {(i, j, a, b)} not stored as i<j, a<b")
            if {i, j} & {a, b}:
                raise InvalidAmplitude(f"double {(i, j, a, b)} overlaps occupied and virtual modes")


def enumerate_excitations(ham: ActiveSpaceHamiltonian):
    """Spin-conserving singles and doubles out of the reference determinant."""
    occ = ham.occ_spin_orbitals()
    vir = ham.virt_spin_orbitals()
    singles = [(i, a) for i in occ for a in vir if i % 2 == a % 2]
    doubles = [(i, j, a, b)
               for i, j in itertools.combinations(occ, 2)
               for a, b in itertools.combinations(vir, 2)
               if sorted((i % 2, j % 2)) == sorted((a % 2, b % 2))]
    return singles, doubles


def mp1_amplitudes(ham: ActiveSpaceHamiltonian, screen: bool = True) -> UccsdAmplitudes:
    """First-order doubles, zero singles.

    With ``screen`` the doubles whose first-order amplitude vanishes are
    left out of the ansatz.
    """
    singles, doubles = enumerate_excitations(ham)
    eps = np.repeat(np.diag(ham.fock()), 2)
    out = UccsdAmplitudes(singles={s: 0.0 for s in singles})
    if not doubles:
        return out
    occ, vir = ham.occ_spin_orbitals(), ham.virt_spin_orbitals()
    g = antisym_block(ham.h2_active, occ, occ, vir, vir)
    oi = {p: k for k, p in enumerate(occ)}
    vi = {p: k for k, p in enumerate(vir)}
    for i, j, a, b in doubles:
        t = g[oi[i], oi[j], vi[a], vi[b]] / (eps[i] + eps[j] - eps[a] - eps[b])
        if screen and abs(t) < SCREEN_TOL:
            continue
        out.doubles[(i, j, a, b)] = float(t)
    return out


def excitation_generator(exc: tuple, theta: float = 1.0) -> PauliSum:
    """JW image of theta (tau - tau^dagger) for one excitation tau."""
    if len(exc) == 2:
        i, a = exc
        tau = ((a, True), (i, False))
        tau_dag = ((i, True), (a, False))
    else:
        i, j, a, b = exc
        tau = ((a, True), (b, True), (j, False), (i, False))
        tau_dag = ((i, True), (j, True), (b, False), (a, False))
    return jordan_wigner([(theta, tau), (-theta, tau_dag)])


def uccsd_generator(amps: UccsdAmplitudes) -> PauliSum:
    """JW image of T - T^dagger, Pauli terms grouped per excitation in application order.

    Zero amplitudes contribute no terms.
    """
    amps.validate()
    out = PauliSum()
    for exc in amps.excitations():
        theta = amps.singles.get(exc, amps.doubles.get(exc))
        if theta == 0.0:
            continue
        for key, c in excitation_generator(exc, theta).items():
            out._add(key, c)
    return out.simplify()
