"""Second-order perturbation theory and frozen natural orbitals.

Everything here works in the spin-orbital basis of an
:class:`~mifno.integrals.ActiveSpaceHamiltonian` (index ``2k + s`` for
active position ``k``). Orbital energies come from the diagonal of the
reference Fock matrix of the Hamiltonian, so an increment that freezes
part of the occupied space still sees full-system denominators.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from mifno.errors import DegeneracyError, PolicyError
from mifno.integrals import ActiveSpaceHamiltonian, antisym_block

DENOMINATOR_FLOOR = 1e-8
EIGEN_CLAMP = 1e-10
# cumulative-occupation comparisons absorb float summation error
OCCUPANCY_SLACK = 1e-12


@dataclass(frozen=True)
class Mp2Result:
    e2: float
    pair_energies: dict


@dataclass(frozen=True)
class VvDensityBlock:
    d: np.ndarray
    occupied_context: tuple
    virt: tuple


@dataclass(frozen=True)
class FnoSubspace:
    """Natural virtual orbitals sorted by descending occupation.

    ``eigenvalues`` and the columns of ``u`` run over spin orbitals. When
    ``spin_paired`` is set the density was alpha/beta block diagonal, each
    spatial FNO contributes an adjacent (alpha, beta) pair and ``kept`` is
    always even.
    """

    eigenvalues: np.ndarray
    u: np.ndarray
    kept: int
    spin_paired: bool
    virt: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def occupancy_fraction(self) -> float:
        if self.kept == self.dim:
            return 1.0
        total = float(self.eigenvalues.sum())
        if total <= 0.0:
            return 1.0
        return float(self.eigenvalues[: self.kept].sum()) / total

    @property
    def kept_spatial(self) -> int:
        return self.kept // 2 if self.spin_paired else self.kept

    @property
    def dim_spatial(self) -> int:
        return self.dim // 2 if self.spin_paired else self.dim

    @property
    def discarded_spatial(self) -> int:
        return self.dim_spatial - self.kept_spatial

    def spatial_u(self) -> np.ndarray:
        """Alpha block of ``u``: canonical spatial virtuals by spatial FNOs."""
        if not self.spin_paired:
            raise ValueError("FNOs mix spin; no spatial transform exists")
        return self.u[0::2, 0::2]

    def spatial_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[0::2] if self.spin_paired else self.eigenvalues


@dataclass(frozen=True)
class FnoPolicy:
    """Truncation rule: keep a cumulative occupancy fraction or a fixed count.

    ``keep_count`` counts spatial FNOs (alpha/beta pairs) for spin-paired
    subspaces. Both fields ``None`` means no truncation.
    """

    occupancy: Optional[float] = None
    keep_count: Optional[int] = None

    def __post_init__(self):
        if self.occupancy is not None and self.keep_count is not None:
            raise PolicyError("occupancy and keep_count are mutually exclusive")

    @property
    def tag(self) -> str:
        if self.occupancy is not None:
            return f"occ={self.occupancy!r}"
        if self.keep_count is not None:
            return f"keep={self.keep_count}"
        return "none"


def _orbital_energies(ham: ActiveSpaceHamiltonian) -> np.ndarray:
    return np.repeat(np.diag(ham.fock()), 2)


def _amplitudes(ham, occ, virt):
    """<ij||ab> and the denominators f_ii + f_jj - f_aa - f_bb."""
    occ, virt = np.asarray(sorted(occ), dtype=int), np.asarray(sorted(virt), dtype=int)
    eps = _orbital_energies(ham)
    g = antisym_block(ham.h2_active, occ, occ, virt, virt)
    denom = (eps[occ][:, None, None, None] + eps[occ][None, :, None, None]
             - eps[virt][None, None, :, None] - eps[virt][None, None, None, :])
    small = (np.abs(denom) < DENOMINATOR_FLOOR) & (np.abs(g) > 1e-14)
    if small.any():
        raise DegeneracyError("vanishing MBPT(2) denominator for a non-zero integral")
    safe = np.where(np.abs(denom) < DENOMINATOR_FLOOR, 1.0, denom)
    return occ, virt, g, g / safe


def mp2_energy(ham: ActiveSpaceHamiltonian, occ: Iterable[int], virt: Iterable[int]) -> Mp2Result:
    occ, virt, g, t = _amplitudes(ham, occ, virt)
    if len(occ) < 2 or len(virt) < 2:
        return Mp2Result(e2=0.0, pair_energies={})
    iu = np.triu_indices(len(virt), 1)
    pair = (g * t)[:, :, iu[0], iu[1]].sum(axis=2)
    pairs = {(int(occ[i]), int(occ[j])): float(pair[i, j])
             for i in range(len(occ)) for j in range(i + 1, len(occ))}
    return Mp2Result(e2=float(sum(pairs.values())), pair_energies=pairs)


def vv_density(ham: ActiveSpaceHamiltonian, occ: Iterable[int], virt: Iterable[int]) -> VvDensityBlock:
    """Virtual-virtual block of the second-order one-particle density.

    D_ab = 1/2 sum_{c,i,j} t_ij^{cb} t_ij^{ca}, with t the first-order
    doubles amplitudes <ij||ab> / (f_ii + f_jj - f_aa - f_bb).
    """
    occ_s, virt_s = tuple(sorted(occ)), tuple(sorted(virt))
    if not occ_s or not virt_s:
        return VvDensityBlock(np.zeros((len(virt_s), len(virt_s))), occ_s, virt_s)
    _, _, _, t = _amplitudes(ham, occ_s, virt_s)
    d = 0.5 * np.einsum("ijcb,ijca->ab", t, t, optimize=True)
    return VvDensityBlock(0.5 * (d + d.T), occ_s, virt_s)


def _is_spin_paired(d: np.ndarray) -> bool:
    if d.shape[0] % 2 or d.shape[0] == 0:
        return False
    scale = max(1.0, float(np.abs(d).max()))
    return (np.abs(d[0::2, 1::2]).max() <= 1e-12 * scale
            and np.abs(d[0::2, 0::2] - d[1::2, 1::2]).max() <= 1e-12 * scale)


def _sorted_eigh(m: np.ndarray):
    """Eigenpairs by descending eigenvalue; ties go to the lower original index."""
    w, v = np.linalg.eigh(m)
    w = np.where((w < 0) & (w >= -EIGEN_CLAMP), 0.0, w)
    lead = np.argmax(np.abs(v), axis=0)
    # deterministic eigenvector sign: largest component positive
    v = v * np.sign(v[lead, np.arange(v.shape[1])])
    order = np.lexsort((lead, -np.round(w, 12)))
    return w[order], v[:, order]


def fno_decompose(block: VvDensityBlock) -> FnoSubspace:
    d = np.asarray(block.d)
    n = d.shape[0]
    if n == 0:
        return FnoSubspace(np.zeros(0), np.zeros((0, 0)), 0, True, block.virt)
    if _is_spin_paired(d):
        w, v = _sorted_eigh(d[0::2, 0::2])
        u = np.zeros((n, n))
        for s in (0, 1):
            u[s::2, s::2] = v
        return FnoSubspace(np.repeat(w, 2), u, n, True, block.virt)
    w, v = _sorted_eigh(d)
    return FnoSubspace(w, v, n, False, block.virt)


def fno_truncate(s: FnoSubspace, policy: FnoPolicy) -> FnoSubspace:
    """Keep the leading FNOs according to ``policy`` (full subspace in, prefix out)."""
    step = 2 if s.spin_paired else 1
    if policy.occupancy is not None:
        tau = policy.occupancy
        if not 0.0 < tau <= 1.0:
            raise PolicyError(f"occupancy fraction {tau} not in (0, 1]")
        if tau >= 1.0:
            kept = s.dim
        else:
            kept = occupancy_prefix(s.eigenvalues, tau)
            kept = -(-kept // step) * step
    elif policy.keep_count is not None:
        k = policy.keep_count
        if not 1 <= k <= s.dim_spatial:
            raise PolicyError(f"keep_count {k} not in [1, {s.dim_spatial}]")
        kept = k * step
    else:
        kept = s.dim
    return replace(s, kept=min(kept, s.dim))


def occupancy_prefix(eigenvalues, tau: float) -> int:
    """Length of the shortest prefix holding at least ``tau`` of the total occupation."""
    w = np.asarray(eigenvalues, dtype=float)
    total = w.sum()
    if len(w) == 0 or total <= 0.0:
        return 0
    reached = np.cumsum(w) / total >= tau - OCCUPANCY_SLACK
    return int(np.argmax(reached)) + 1 if reached.any() else len(w)


def _rotate(ham: ActiveSpaceHamiltonian, c: np.ndarray, labels, occupied) -> ActiveSpaceHamiltonian:
    h1 = c.T @ ham.eff_h1 @ c
    h2 = np.einsum("pqrs,pi,qj,rk,sl->ijkl", ham.h2_active, c, c, c, c, optimize=True)
    return ActiveSpaceHamiltonian(labels=tuple(labels), occupied=tuple(occupied),
                                  eff_core=ham.eff_core, eff_h1=0.5 * (h1 + h1.T), h2_active=h2)


def transform_virtuals(ham: ActiveSpaceHamiltonian, s: FnoSubspace) -> ActiveSpaceHamiltonian:
    """Rotate the virtual space onto the kept FNOs, then semicanonicalise.

    The result lists the occupied orbitals first (untouched) followed by the
    kept virtuals, ordered by ascending semicanonical orbital energy. If the
    kept virtual Fock block is already diagonal the rotation is skipped.
    """
    occ, virt = ham.occ_positions, ham.virt_positions
    if s.virt and tuple(s.virt) != tuple(ham.virt_spin_orbitals()):
        raise ValueError("FNO subspace was built over a different virtual set")
    u = s.spatial_u()[:, : s.kept_spatial]
    n, m = ham.n_orbitals, len(occ) + u.shape[1]
    c = np.zeros((n, m))
    c[occ, np.arange(len(occ))] = 1.0
    c[np.ix_(virt, np.arange(len(occ), m))] = u
    fv = (c.T @ ham.fock() @ c)[len(occ):, len(occ):]
    off = fv - np.diag(np.diag(fv))
    if fv.size and np.abs(off).max() > 1e-10:
        w, v = np.linalg.eigh(fv)
        v = v * np.sign(v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])])
        c[:, len(occ):] = c[:, len(occ):] @ v
    labels = [ham.labels[k] for k in occ] + [f"fno{k}" for k in range(u.shape[1])]
    return _rotate(ham, c, labels, [True] * len(occ) + [False] * u.shape[1])


def rotate_virtuals(ham: ActiveSpaceHamiltonian, u: np.ndarray) -> ActiveSpaceHamiltonian:
    """Apply an arbitrary orthogonal spatial rotation to the virtual block (no truncation)."""
    virt = ham.virt_positions
    c = np.eye(ham.n_orbitals)
    c[np.ix_(virt, virt)] = u
    return _rotate(ham, c, ham.labels, ham.occupied)


def delta_mp2(ham_full: ActiveSpaceHamiltonian, ham_truncated: ActiveSpaceHamiltonian,
              occ: Optional[Iterable[int]] = None) -> float:
    """E_MP2(full virtual space) - E_MP2(truncated space) over the same occupied set."""
    occ_full = list(occ) if occ is not None else ham_full.occ_spin_orbitals()
    occ_trunc = list(occ) if occ is not None else ham_truncated.occ_spin_orbitals()
    e_full = mp2_energy(ham_full, occ_full, ham_full.virt_spin_orbitals()).e2
    e_trunc = mp2_energy(ham_truncated, occ_trunc, ham_truncated.virt_spin_orbitals()).e2
    return e_full - e_trunc
