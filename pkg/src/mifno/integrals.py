"""Molecular integrals: FCIDUMP I/O, spin-orbital views, Fock matrices and
frozen-orbital folding.

Spatial integrals are kept in chemists' notation ``(pq|rs)`` exactly as an
FCIDUMP stores them. Spin orbitals are interleaved: spatial orbital ``p``
maps to ``2p`` (alpha) and ``2p + 1`` (beta).
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from mifno.errors import (
    CapacityError,
    ConsistencyError,
    InvalidOccupation,
    InvalidPartition,
    ParseError,
)

# Dense n**4 storage of the two-electron integrals above this is refused.
MAX_DENSE_ORBITALS = 64
DUPLICATE_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def spin_orbitals(spatial: Iterable[int]) -> list[int]:
    """Interleaved spin-orbital indices for a list of spatial orbitals."""
    return [2 * p + s for p in spatial for s in (0, 1)]


@dataclass(frozen=True)
class IntegralStore:
    n_spatial: int
    n_electrons: int
    core_energy: float
    h1: np.ndarray
    h2: np.ndarray
    ms2: int = 0
    orbsym: tuple = ()
    isym: int = 1

    def __post_init__(self):
        n = self.n_spatial
        if n > MAX_DENSE_ORBITALS:
            raise CapacityError(f"{n} orbitals exceeds dense cap {MAX_DENSE_ORBITALS}")
        if self.h1.shape != (n, n) or self.h2.shape != (n,) * 4:
            raise ValueError("integral arrays do not match n_spatial")
        object.__setattr__(self, "h1", _frozen(self.h1))
        object.__setattr__(self, "h2", _frozen(self.h2))

    @property
    def n_occupied(self) -> int:
        """Doubly occupied spatial orbitals of the closed-shell reference."""
        return self.n_electrons // 2

    @property
    def n_spin(self) -> int:
        return 2 * self.n_spatial

    def occupied_spin_orbitals(self) -> list[int]:
        return spin_orbitals(range(self.n_occupied))

    def eri(self, p: int, q: int, r: int, s: int) -> float:
        """(pq|rs) over spatial orbitals."""
        return float(self.h2[p, q, r, s])


# ---------------------------------------------------------------------------
# FCIDUMP parsing and serialisation

_HEADER_END = re.compile(r"(&END|/)\s*$", re.IGNORECASE)
_KEY = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)\s*=")


def _parse_namelist(text: str) -> dict[str, list[int]]:
    body = re.sub(r"^\s*&FCI", "", text, flags=re.IGNORECASE)
    body = re.sub(r"(&END|/)\s*$", "", body.strip(), flags=re.IGNORECASE)
    keys = list(_KEY.finditer(body))
    out = {}
    for k, m in enumerate(keys):
        stop = keys[k + 1].start() if k + 1 < len(keys) else len(body)
        raw = body[m.end():stop]
        tokens = [t for t in re.split(r"[,\s]+", raw) if t]
        try:
            out[m.group(1).upper()] = [int(t) for t in tokens]
        except ValueError as exc:
            raise ParseError(f"bad value for {m.group(1)}: {raw!r}") from exc
    return out


def parse_fcidump(source: str | TextIO) -> IntegralStore:
    """Parse Molpro-style FCIDUMP text into an :class:`IntegralStore`.

    ``source`` is the file contents or an open text stream. Both the
    ``&FCI ... &END`` and ``/``-terminated namelist variants are accepted.
    """
    lines = (source if isinstance(source, str) else source.read()).splitlines()
    header, body_start = [], None
    for k, line in enumerate(lines):
        header.append(line)
        if _HEADER_END.search(line.strip()):
            body_start = k + 1
            break
    if body_start is None or not header[0].strip().upper().startswith("&FCI"):
        raise ParseError("missing &FCI ... &END header")
    keys = _parse_namelist("\n".join(header))
    for required in ("NORB", "NELEC"):
        if len(keys.get(required, [])) != 1:
            raise ParseError(f"header lacks {required}")
    norb, nelec = keys["NORB"][0], keys["NELEC"][0]
    ms2 = keys.get("MS2", [0])[0]
    if norb < 1 or nelec < 0:
        raise ParseError("NORB must be positive and NELEC non-negative")
    if norb > MAX_DENSE_ORBITALS:
        raise CapacityError(f"{norb} orbitals exceeds dense cap {MAX_DENSE_ORBITALS}")

    rows = []
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ParseError(f"line {lineno}: expected 'value i j k l', got {line!r}")
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            idx = [int(t) for t in parts[1:]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {line!r}") from exc
        if any(i < 0 or i > norb for i in idx):
            raise IndexError(f"line {lineno}: index outside [1, {norb}] in {line!r}")
        rows.append((value, *idx))
    data = np.array(rows, dtype=float).reshape(-1, 5)
    vals = data[:, 0]
    ijkl = data[:, 1:].astype(int)

    h1 = np.zeros((norb, norb))
    h2 = np.zeros((norb,) * 4)
    core = 0.0

    two = np.all(ijkl > 0, axis=1)
    one = (ijkl[:, 0] > 0) & (ijkl[:, 1] > 0) & (ijkl[:, 2] == 0) & (ijkl[:, 3] == 0)
    nuc = np.all(ijkl == 0, axis=1)
    # (i 0 0 0) lines carry orbital energies; they are redundant and ignored.
    known = two | one | nuc | ((ijkl[:, 0] > 0) & np.all(ijkl[:, 1:] == 0, axis=1))
    if not known.all():
        bad = int(np.flatnonzero(~known)[0])
        raise ParseError(f"unrecognised index pattern {tuple(ijkl[bad])}")

    if nuc.any():
        cv = vals[nuc]
        if np.ptp(cv) > DUPLICATE_TOL:
            raise ConsistencyError("conflicting core-energy entries")
        core = float(cv[0])

    if one.any():
        i, j = ijkl[one, 0] - 1, ijkl[one, 1] - 1
        key = np.maximum(i, j) * norb + np.minimum(i, j)
        _check_duplicates(key, vals[one], "one-electron")
        h1[i, j] = vals[one]
        h1[j, i] = vals[one]

    if two.any():
        i, j, k, l = (ijkl[two] - 1).T
        ij = np.maximum(i, j) * (np.maximum(i, j) + 1) // 2 + np.minimum(i, j)
        kl = np.maximum(k, l) * (np.maximum(k, l) + 1) // 2 + np.minimum(k, l)
        key = np.maximum(ij, kl) * (norb * (norb + 1) // 2) + np.minimum(ij, kl)
        v = vals[two]
        _check_duplicates(key, v, "two-electron")
        for a, b, c, d in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)):
            h2[a, b, c, d] = v
            h2[c, d, a, b] = v

    return IntegralStore(
        n_spatial=norb,
        n_electrons=nelec,
        core_energy=core,
        h1=h1,
        h2=h2,
        ms2=ms2,
        orbsym=tuple(keys.get("ORBSYM", ())),
        isym=keys.get("ISYM", [1])[0],
    )


def _check_duplicates(key: np.ndarray, vals: np.ndarray, what: str) -> None:
    order = np.argsort(key, kind="stable")
    k, v = key[order], vals[order]
    same = k[1:] == k[:-1]
    if np.any(np.abs(v[1:] - v[:-1])[same] > DUPLICATE_TOL):
        raise ConsistencyError(f"conflicting duplicate {what} integrals")


def read_fcidump(path) -> IntegralStore:
    with open(path) as fh:
        return parse_fcidump(fh)


def serialize_fcidump(store: IntegralStore, tol: float = 1e-15,
                      float_format: str = " %.16g") -> str:
    """Write ``store`` in the layout used by PySCF's ``fcidump`` writer.

    Only the symmetry-unique ``(ij|kl)`` with ``i>=j``, ``k>=l``, ``ij>=kl``
    and the lower triangle of ``h1`` are written; entries with magnitude
    ``<= tol`` are skipped.
    """
    n = store.n_spatial
    out = io.StringIO()
    out.write(" &FCI NORB=%4d,NELEC=%2d,MS2=%d,\n" % (n, store.n_electrons, store.ms2))
    if store.orbsym:
        out.write("  ORBSYM=%s\n" % ("".join(f"{x}," for x in store.orbsym)))
    else:
        out.write("  ORBSYM=%s\n" % ("1," * n))
    out.write("  ISYM=%d,\n" % store.isym)
    out.write(" &END\n")
    fmt2 = float_format + " %4d %4d %4d %4d\n"
    h2 = store.h2
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(i + 1):
                for l in range(k + 1):
                    if ij >= k * (k + 1) // 2 + l:
                        v = h2[i, j, k, l]
                        if abs(v) > tol:
                            out.write(fmt2 % (v, i + 1, j + 1, k + 1, l + 1))
    fmt1 = float_format + " %4d %4d  0  0\n"
    for i in range(n):
        for j in range(i + 1):
            if abs(store.h1[i, j]) > tol:
                out.write(fmt1 % (store.h1[i, j], i + 1, j + 1))
    out.write((float_format + "  0  0  0  0\n") % store.core_energy)
    return out.getvalue()


# ---------------------------------------------------------------------------
# Spin-orbital views


def antisym_eri(store: IntegralStore, P: int, Q: int, R: int, S: int) -> float:
    """<PQ||RS> = <PQ|RS> - <PQ|SR> in physicists' notation over spin orbitals."""
    n = store.n_spin
    if not all(0 <= x < n for x in (P, Q, R, S)):
        raise IndexError(f"spin-orbital index outside [0, {n})")
    return _phys(store.h2, P, Q, R, S) - _phys(store.h2, P, Q, S, R)


def _phys(h2, P, Q, R, S) -> float:
    if P % 2 != R % 2 or Q % 2 != S % 2:
        return 0.0
    return float(h2[P // 2, R // 2, Q // 2, S // 2])


def antisym_block(h2: np.ndarray, P, Q, R, S) -> np.ndarray:
    """Dense block <PQ||RS> for spin-orbital index lists over spatial ``h2``."""
    P, Q, R, S = (np.asarray(x, dtype=int) for x in (P, Q, R, S))

    def direct(A, B, C, D):
        g = h2[np.ix_(A // 2, C // 2, B // 2, D // 2)].transpose(0, 2, 1, 3)
        mask = ((A % 2)[:, None, None, None] == (C % 2)[None, None, :, None]) & (
            (B % 2)[None, :, None, None] == (D % 2)[None, None, None, :]
        )
        return g * mask

    return direct(P, Q, R, S) - direct(P, Q, S, R).transpose(0, 1, 3, 2)


@dataclass(frozen=True)
class FockMatrix:
    f: np.ndarray
    e_hf: float
    diagonal: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "diagonal", _frozen(np.diag(self.f).copy()))


def build_fock(store: IntegralStore, occupied: Iterable[int]) -> FockMatrix:
    """Spin-orbital Fock matrix f_PQ = h_PQ + sum_I <PI||QI> and the determinant energy."""
    occ = sorted(set(occupied))
    if len(occ) != store.n_electrons:
        raise InvalidOccupation(f"{len(occ)} occupied spin orbitals for {store.n_electrons} electrons")
    ns = store.n_spin
    if any(not 0 <= I < ns for I in occ):
        raise IndexError("occupied spin orbital out of range")
    h = np.kron(store.h1, np.eye(2))
    g = np.zeros((ns, ns))
    for I in occ:
        i, si = divmod(I, 2)
        coul = np.kron(store.h2[:, :, i, i], np.eye(2))
        exch = np.zeros((ns, ns))
        exch[si::2, si::2] = store.h2[:, i, i, :]
        g += coul - exch
    f = h + g
    f = 0.5 * (f + f.T)
    e_hf = store.core_energy + 0.5 * sum(h[I, I] + f[I, I] for I in occ)
    return FockMatrix(f=f, e_hf=float(e_hf))


# ---------------------------------------------------------------------------
# Active spaces


@dataclass(frozen=True)
class ActiveSpaceHamiltonian:
    """Closed-shell Hamiltonian over an active set of spatial orbitals.

    ``labels`` records where each active orbital came from (an index into
    the parent store, or a string for rotated orbitals). ``occupied`` marks
    the orbitals doubly occupied in the reference determinant. Spin
    orbitals of the active space are numbered ``2k + s`` over positions
    ``k``.
    """

    labels: tuple
    occupied: tuple
    eff_core: float
    eff_h1: np.ndarray
    h2_active: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if len(self.occupied) != n or self.eff_h1.shape != (n, n) or self.h2_active.shape != (n,) * 4:
            raise ValueError("inconsistent active-space dimensions")
        object.__setattr__(self, "occupied", tuple(bool(x) for x in self.occupied))
        object.__setattr__(self, "eff_h1", _frozen(self.eff_h1))
        object.__setattr__(self, "h2_active", _frozen(self.h2_active))

    @property
    def n_orbitals(self) -> int:
        return len(self.labels)

    @property
    def n_occupied(self) -> int:
        return sum(self.occupied)

    @property
    def n_virtual(self) -> int:
        return self.n_orbitals - self.n_occupied

    @property
    def n_electrons(self) -> int:
        return 2 * self.n_occupied

    @property
    def occ_positions(self) -> list[int]:
        return [k for k, o in enumerate(self.occupied) if o]

    @property
    def virt_positions(self) -> list[int]:
        return [k for k, o in enumerate(self.occupied) if not o]

    @property
    def active_orbitals(self) -> list:
        """Spin-orbital labels (parent-store numbering) of the active space."""
        return [2 * p + s if isinstance(p, (int, np.integer)) else f"{p}{'ab'[s]}"
                for p in self.labels for s in (0, 1)]

    def occ_spin_orbitals(self) -> list[int]:
        return spin_orbitals(self.occ_positions)

    def virt_spin_orbitals(self) -> list[int]:
        return spin_orbitals(self.virt_positions)

    def fock(self) -> np.ndarray:
        """Spatial closed-shell Fock matrix of the reference determinant."""
        o = self.occ_positions
        g = self.h2_active
        j = np.einsum("pqii->pq", g[:, :, o][:, :, :, o])
        k = np.einsum("piiq->pq", g[:, o][:, :, o])
        return self.eff_h1 + 2.0 * j - k

    def hf_energy(self) -> float:
        o = self.occ_positions
        f = self.fock()
        return float(self.eff_core + sum(self.eff_h1[i, i] + f[i, i] for i in o))


def fold_spatial(store: IntegralStore, frozen: Sequence[int], active: Sequence[int]) -> ActiveSpaceHamiltonian:
    """Fold doubly occupied ``frozen`` spatial orbitals into a mean field over ``active``."""
    frozen, active = list(frozen), list(active)
    n, nocc = store.n_spatial, store.n_occupied
    if len(set(active)) != len(active) or len(set(frozen)) != len(frozen):
        raise InvalidPartition("repeated orbital")
    if set(frozen) & set(active):
        raise InvalidPartition(f"orbitals both frozen and active: {sorted(set(frozen) & set(active))}")
    if any(not 0 <= p < n for p in frozen + active):
        raise IndexError("orbital index out of range")
    if any(p >= nocc for p in frozen):
        raise InvalidPartition("only occupied orbitals can be frozen")
    covered = set(frozen) | {p for p in active if p < nocc}
    if covered != set(range(nocc)):
        raise InvalidPartition(f"occupied orbitals neither frozen nor active: {sorted(set(range(nocc)) - covered)}")

    h1, h2 = store.h1, store.h2
    if frozen:
        fz = np.array(frozen)
        j = np.einsum("pqii->pq", h2[:, :, fz][:, :, :, fz])
        k = np.einsum("piiq->pq", h2[:, fz][:, :, fz])
        veff = 2.0 * j - k
        jj = h2[np.ix_(fz, fz, fz, fz)]
        e_frozen = 2.0 * h1[fz, fz].sum() + 2.0 * np.einsum("iijj->", jj) - np.einsum("ijji->", jj)
    else:
        veff = np.zeros_like(h1)
        e_frozen = 0.0
    a = np.array(active, dtype=int)
    return ActiveSpaceHamiltonian(
        labels=tuple(int(p) for p in active),
        occupied=tuple(p < nocc for p in active),
        eff_core=float(store.core_energy + e_frozen),
        eff_h1=(h1 + veff)[np.ix_(a, a)] if len(a) else np.zeros((0, 0)),
        h2_active=h2[np.ix_(a, a, a, a)] if len(a) else np.zeros((0,) * 4),
    )


def _spin_pairs(spin_orbs: Iterable[int], what: str) -> list[int]:
    so = list(spin_orbs)
    spatial = []
    for P in so:
        if P % 2 == 0:
            spatial.append(P // 2)
    if sorted(so) != sorted(spin_orbitals(spatial)) or len(so) != 2 * len(spatial):
        raise InvalidPartition(f"{what} spin orbitals must come in alpha/beta pairs (closed shell)")
    return spatial


def fold_frozen(store: IntegralStore, frozen_occ: Iterable[int], active: Sequence[int]) -> ActiveSpaceHamiltonian:
    """Spin-orbital front end of :func:`fold_spatial`.

    Both arguments are spin-orbital indices; each spatial orbital must be
    entirely frozen or entirely active. The active list order is kept.
    """
    frozen = set(frozen_occ)
    if frozen & set(active):
        raise InvalidPartition("frozen and active spin orbitals overlap")
    frozen_sp = _spin_pairs(sorted(frozen), "frozen")
    act_sp = []
    for P in active:
        if P // 2 not in act_sp:
            act_sp.append(P // 2)
    _spin_pairs(active, "active")
    return fold_spatial(store, frozen_sp, act_sp)
