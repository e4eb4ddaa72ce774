"""Pauli-string algebra and the Jordan-Wigner mapping.

A Pauli string on qubits is stored symplectically as two bitmasks
``(x, z)``: qubit ``q`` carries X if only bit q of ``x`` is set, Z if only
bit q of ``z`` is set and Y if both are. Qubit ``q`` is bit ``q`` of a
computational basis index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp

DROP_TOL = 1e-12

_I_POW = (1, 1j, -1, -1j)


def _popcount(x: int) -> int:
    return bin(x).count("1")


def pauli_product(a: tuple, b: tuple) -> tuple:
    """``P_a P_b = phase * P_c``; returns ``(phase, c)``."""
    (x1, z1), (x2, z2) = a, b
    x3, z3 = x1 ^ x2, z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) - _popcount(x3 & z3) + 2 * _popcount(z1 & x2)
    return _I_POW[k % 4], (x3, z3)


@dataclass(frozen=True)
class PauliTerm:
    coeff: complex
    ops: dict

    @property
    def weight(self) -> int:
        return len(self.ops)

    def label(self) -> str:
        return " ".join(f"{p}{q}" for q, p in sorted(self.ops.items())) or "I"


def _ops(key: tuple) -> dict:
    x, z = key
    out = {}
    q = 0
    m = x | z
    while m >> q:
        if m >> q & 1:
            out[q] = "Y" if (x >> q & 1) and (z >> q & 1) else ("X" if x >> q & 1 else "Z")
        q += 1
    return out


def key_from_ops(ops: dict) -> tuple:
    x = z = 0
    for q, p in ops.items():
        if p in "XY":
            x |= 1 << q
        if p in "ZY":
            z |= 1 << q
    return x, z


class PauliSum:
    """Insertion-ordered linear combination of Pauli strings."""

    def __init__(self, terms: dict | None = None):
        self._terms: dict = dict(terms or {})

    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "PauliSum":
        return cls({(0, 0): coeff})

    @classmethod
    def from_labels(cls, items: Iterable) -> "PauliSum":
        """From ``(coeff, {qubit: 'X'|'Y'|'Z'})`` pairs."""
        out = cls()
        for c, ops in items:
            out._add(key_from_ops(ops), c)
        return out

    def _add(self, key, c):
        self._terms[key] = self._terms.get(key, 0.0) + c

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        for key, c in self._terms.items():
            yield PauliTerm(c, _ops(key))

    def items(self):
        return self._terms.items()

    def coefficient(self, ops: dict) -> complex:
        return self._terms.get(key_from_ops(ops), 0.0)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        out = PauliSum(self._terms)
        for k, c in other._terms.items():
            out._add(k, c)
        return out

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            out = PauliSum()
            for ka, ca in self._terms.items():
                for kb, cb in other._terms.items():
                    ph, kc = pauli_product(ka, kb)
                    out._add(kc, ph * ca * cb)
            return out
        return PauliSum({k: c * other for k, c in self._terms.items()})

    __rmul__ = __mul__

    def simplify(self, tol: float = DROP_TOL) -> "PauliSum":
        """Drop tiny terms and store purely real or imaginary coefficients exactly."""
        out = {}
        for k, c in self._terms.items():
            c = complex(c)
            re = c.real if abs(c.real) > tol else 0.0
            im = c.imag if abs(c.imag) > tol else 0.0
            if re or im:
                out[k] = re if not im else (1j * im if not re else complex(re, im))
        return PauliSum(out)

    def n_qubits(self) -> int:
        m = 0
        for x, z in self._terms:
            m |= x | z
        return m.bit_length()

    def to_sparse(self, n_qubits: int) -> sp.csr_matrix:
        dim = 1 << n_qubits
        idx = np.arange(dim, dtype=np.int64)
        out = sp.csr_matrix((dim, dim), dtype=complex)
        rows, cols, vals = [], [], []
        for (x, z), c in self._terms.items():
            src = idx
            dst = idx ^ x
            ph = _I_POW[_popcount(x & z) % 4] * (1 - 2 * (np.bitwise_count(src & z).astype(np.int64) & 1))
            rows.append(dst)
            cols.append(src)
            vals.append(c * ph)
        if rows:
            out = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(dim, dim))
        return out

    def to_dense(self, n_qubits: int) -> np.ndarray:
        return self.to_sparse(n_qubits).toarray()

    def __repr__(self) -> str:
        inner = ", ".join(f"{t.coeff:+.6g}*{t.label()}" for t in list(self)[:6])
        more = "" if len(self) <= 6 else f", ... ({len(self)} terms)"
        return f"PauliSum({inner}{more})"


@lru_cache(maxsize=None)
def _ladder(p: int, dagger: bool) -> PauliSum:
    # a+_p = (X_p - iY_p)/2 Z_{<p};  a_p = (X_p + iY_p)/2 Z_{<p}
    below = (1 << p) - 1
    s = -0.5j if dagger else 0.5j
    return PauliSum({(1 << p, below): 0.5, (1 << p, below | (1 << p)): s})


def ladder(p: int, dagger: bool) -> PauliSum:
    return _ladder(p, dagger)


def jordan_wigner(terms: Iterable) -> PauliSum:
    """Map a fermion operator to qubits.

    ``terms`` yields ``(coeff, ops)`` with ``ops`` a sequence of
    ``(mode, is_creation)`` pairs read left to right, e.g.
    ``(0.5, ((1, True), (0, False)))`` for ``0.5 a+_1 a_0``.
    """
    out = PauliSum()
    for coeff, ops in terms:
        prod = PauliSum.identity(coeff)
        for mode, dag in ops:
            prod = prod * _ladder(mode, bool(dag))
        for k, c in prod.items():
            out._add(k, c)
    return out.simplify()
