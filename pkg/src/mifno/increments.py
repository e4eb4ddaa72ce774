"""Many-body expansion of the correlation energy over occupied orbitals.

An increment is a strictly ascending tuple of occupied spatial-orbital
indices. Its increment energy is the inclusion-exclusion remainder

    eps(S) = E_c(S) - sum over non-empty proper subsets T of S of eps(T)

which reproduces the usual one-, two- and three-body recursions and is
unambiguous at every order.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from math import comb

from mifno.errors import ConsistencyError, DependencyError, IncompleteExpansion, OrderError

EC_CONFLICT_TOL = 1e-9

PENDING, SOLVED, FAILED, SCREENED = "pending", "solved", "failed", "screened"


class Increment(tuple):
    """Ascending tuple of occupied spatial-orbital indices."""

    def __new__(cls, indices=()):
        t = tuple(int(i) for i in indices)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"increment indices must be strictly ascending: {t}")
        if t and t[0] < 0:
            raise ValueError("negative orbital index")
        return super().__new__(cls, t)

    @property
    def occ_subset(self) -> tuple:
        return tuple(self)

    @property
    def order(self) -> int:
        return len(self)

    def proper_subsets(self):
        """Non-empty proper subsets, by size then lexicographically."""
        for m in range(1, len(self)):
            for c in itertools.combinations(self, m):
                yield Increment(c)

    def label(self, one_based: bool = True) -> str:
        names = ["one", "two", "three", "four", "five", "six"]
        body = names[self.order - 1] if self.order <= len(names) else f"{self.order}"
        off = 1 if one_based else 0
        return f"{body}-body ({','.join(str(i + off) for i in self)})"


def count_increments(n_occ: int, n: int) -> int:
    return sum(comb(n_occ, m) for m in range(1, n + 1))


def enumerate_increments(n_occ: int, n: int) -> list[Increment]:
    """All subsets of sizes 1..n of range(n_occ), by size then lexicographically."""
    if n < 1:
        raise OrderError("expansion order must be at least 1")
    if n > n_occ:
        raise OrderError(f"expansion order {n} exceeds {n_occ} occupied orbitals")
    return [Increment(c) for m in range(1, n + 1) for c in itertools.combinations(range(n_occ), m)]


def increments_of_order(n_occ: int, m: int) -> list[Increment]:
    """Subsets of exactly size m, lexicographically."""
    if not 1 <= m <= n_occ:
        raise OrderError(f"order {m} outside [1, {n_occ}]")
    return [Increment(c) for c in itertools.combinations(range(n_occ), m)]


@dataclass
class IncrementLedger:
    n_occ: int
    ec: dict = field(default_factory=dict)
    eps: dict = field(default_factory=dict)
    status: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record_ec(self, s, value: float) -> None:
        s = Increment(s)
        with self._lock:
            old = self.ec.get(s)
            if old is not None and abs(old - value) > EC_CONFLICT_TOL:
                raise ConsistencyError(f"E_c{tuple(s)} recorded as {old!r} and {value!r}")
            self.ec[s] = float(value)
            self.status[s] = SOLVED

    def mark(self, s, status: str) -> None:
        with self._lock:
            self.status[Increment(s)] = status

    def mark_screened(self, s) -> None:
        s = Increment(s)
        with self._lock:
            self.status[s] = SCREENED
            self.eps[s] = 0.0

    def pending(self, increments) -> list[Increment]:
        return [Increment(s) for s in increments if self.status.get(Increment(s)) not in (SOLVED, SCREENED)]


def increment_epsilon(ledger: IncrementLedger, s) -> float:
    """Compute, cache and return eps(S); every proper subset needs a cached eps."""
    s = Increment(s)
    if s not in ledger.ec:
        raise DependencyError(f"no correlation energy for {tuple(s)}")
    lower = []
    for t in s.proper_subsets():
        if t not in ledger.eps:
            raise DependencyError(f"eps{tuple(t)} needed by {tuple(s)} is not cached")
        lower.append(ledger.eps[t])
    value = ledger.ec[s] - math.fsum(lower)
    ledger.eps[s] = value
    return value


def reduce_order(ledger: IncrementLedger, order: int) -> None:
    """Evaluate eps for every solved increment of one order, lexicographically."""
    for s in sorted(k for k, st in ledger.status.items() if st == SOLVED and len(k) == order):
        increment_epsilon(ledger, s)


@dataclass(frozen=True)
class ExpansionResult:
    n: int
    e_corr: float
    e_hf: float
    per_order_sums: dict

    @property
    def e_total(self) -> float:
        return self.e_hf + self.e_corr


def reconstruct(ledger: IncrementLedger, n: int, e_hf: float = 0.0) -> ExpansionResult:
    """Sum the increment energies of orders 1..n."""
    expected = enumerate_increments(ledger.n_occ, n)
    missing = [s for s in expected if ledger.status.get(s) not in (SOLVED, SCREENED)]
    if missing:
        raise IncompleteExpansion(missing)
    for m in range(1, n + 1):
        reduce_order(ledger, m)
    per_order = {m: math.fsum(ledger.eps[s] for s in expected if len(s) == m) for m in range(1, n + 1)}
    return ExpansionResult(n=n, e_corr=math.fsum(per_order.values()), e_hf=e_hf, per_order_sums=per_order)


def screen(ledger: IncrementLedger, threshold: float, order: int) -> list[Increment]:
    """Work list for ``order`` after energy screening of order - 1.

    A candidate is pruned (marked screened, eps = 0) when every one of its
    sub-increments one order lower has |eps| < threshold. A zero threshold
    prunes nothing.
    """
    candidates = increments_of_order(ledger.n_occ, order)
    if order <= 1 or threshold <= 0.0:
        return candidates
    kept = []
    for s in candidates:
        subs = [Increment(c) for c in itertools.combinations(s, order - 1)]
        if any(t not in ledger.eps for t in subs):
            raise DependencyError(f"order {order - 1} must be reduced before screening")
        if all(abs(ledger.eps[t]) < threshold for t in subs):
            ledger.mark_screened(s)
        else:
            kept.append(s)
    return kept
