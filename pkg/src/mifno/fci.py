"""Exact diagonalisation in the determinant basis.

Determinants are products of an alpha string and a beta string over the
active spatial orbitals. Strings are enumerated in lexicographic order of
their occupied-orbital tuples and the CI vector is stored alpha-major as a
``(n_alpha_strings, n_beta_strings)`` array. Fermionic signs follow the
alpha-then-beta concatenated ordering: creation and annihilation signs
count set bits below the acted-on orbital inside the same-spin string.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from mifno.errors import ConvergenceError, ShapeError
from mifno.integrals import ActiveSpaceHamiltonian

# Above this many determinants Davidson is cheaper than dense assembly.
DENSE_LIMIT = 500


def _popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def make_strings(n: int, k: int) -> np.ndarray:
    """Occupation bitmasks of all k-electron strings over n orbitals."""
    return np.array([sum(1 << p for p in c) for c in itertools.combinations(range(n), k)],
                    dtype=np.int64)


@dataclass
class DeterminantSpace:
    n_orbitals: int
    n_alpha: int
    n_beta: int
    occupied: tuple = None
    alpha: np.ndarray = field(init=False, repr=False)
    beta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.alpha = make_strings(self.n_orbitals, self.n_alpha)
        self.beta = make_strings(self.n_orbitals, self.n_beta)

    @classmethod
    def for_hamiltonian(cls, ham: ActiveSpaceHamiltonian) -> "DeterminantSpace":
        return cls(ham.n_orbitals, ham.n_occupied, ham.n_occupied, ham.occupied)

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.n_orbitals

    @property
    def shape(self) -> tuple:
        return len(self.alpha), len(self.beta)

    @property
    def size(self) -> int:
        return len(self.alpha) * len(self.beta)

    @property
    def dets(self) -> np.ndarray:
        """Concatenated bitmasks ``alpha | beta << n`` in storage order."""
        return (self.alpha[:, None] | (self.beta[None, :] << self.n_orbitals)).ravel()

    def string_index(self, strings: np.ndarray, which: str) -> np.ndarray:
        ref = self.alpha if which == "alpha" else self.beta
        order = np.argsort(ref)
        pos = np.searchsorted(ref[order], strings)
        return order[np.minimum(pos, len(ref) - 1)]

    def det_index(self, dets: np.ndarray) -> np.ndarray:
        mask = (1 << self.n_orbitals) - 1
        a = self.string_index(dets & mask, "alpha")
        b = self.string_index(dets >> self.n_orbitals, "beta")
        return a * len(self.beta) + b

    @property
    def hf_index(self) -> int:
        occ = self.occupied if self.occupied is not None else [True] * self.n_alpha + [False] * (self.n_orbitals - self.n_alpha)
        s = sum(1 << k for k, o in enumerate(occ) if o)
        return int(self.det_index(np.array([s | (s << self.n_orbitals)]))[0])

    def hf_vector(self) -> np.ndarray:
        c = np.zeros(self.size)
        c[self.hf_index] = 1.0
        return c

    @cached_property
    def _links_alpha(self):
        return _excitation_operators(self.alpha, self.n_orbitals)

    @cached_property
    def _links_beta(self):
        return _excitation_operators(self.beta, self.n_orbitals)


def _excitation_operators(strings: np.ndarray, n: int):
    """Sparse matrices of E_pq = a+_p a_q over one spin's strings.

    Returns ``(A, B)``: ``A[(pq, J), I]`` and ``B[J, (pq, I)]`` both equal the
    sign in ``E_pq |I> = sign |J>``.
    """
    ns = len(strings)
    lookup = {int(s): k for k, s in enumerate(strings)}
    rows_pq, rows_j, cols_i, vals = [], [], [], []
    for I, s in enumerate(strings):
        s = int(s)
        for q in range(n):
            if not s >> q & 1:
                continue
            s1 = s ^ (1 << q)
            sign_q = -1 if bin(s & ((1 << q) - 1)).count("1") & 1 else 1
            for p in range(n):
                if s1 >> p & 1:
                    continue
                sign_p = -1 if bin(s1 & ((1 << p) - 1)).count("1") & 1 else 1
                rows_pq.append(p * n + q)
                rows_j.append(lookup[s1 | (1 << p)])
                cols_i.append(I)
                vals.append(sign_p * sign_q)
    pq = np.array(rows_pq, dtype=np.int64)
    J = np.array(rows_j, dtype=np.int64)
    I = np.array(cols_i, dtype=np.int64)
    v = np.array(vals, dtype=float)
    A = sp.csr_matrix((v, (pq * ns + J, I)), shape=(n * n * ns, ns))
    B = sp.csr_matrix((v, (J, pq * ns + I)), shape=(ns, n * n * ns))
    return A, B


def _sigma_block(ham: ActiveSpaceHamiltonian, space: DeterminantSpace, X: np.ndarray) -> np.ndarray:
    """H applied to each column of ``X`` reshaped as (na, nb, k)."""
    na, nb = space.shape
    k = X.shape[-1]
    n = ham.n_orbitals
    n2 = n * n
    X = X.reshape(na, nb, k)
    h2 = ham.h2_active.reshape(n2, n2)
    kpq = ham.eff_h1 - 0.5 * np.einsum("prrq->pq", ham.h2_active)
    Aa, Ba = space._links_alpha
    Ab, Bb = space._links_beta
    D = (Aa @ X.reshape(na, nb * k)).reshape(n2, na, nb, k)
    D += (Ab @ X.transpose(1, 0, 2).reshape(nb, na * k)).reshape(n2, nb, na, k).transpose(0, 2, 1, 3)
    D = D.reshape(n2, na * nb * k)
    sigma = ham.eff_core * X + (kpq.ravel() @ D).reshape(na, nb, k)
    G = (h2 @ D).reshape(n2, na, nb, k)
    sigma += 0.5 * (Ba @ G.reshape(n2 * na, nb * k)).reshape(na, nb, k)
    Gt = np.ascontiguousarray(G.transpose(0, 2, 1, 3)).reshape(n2 * nb, na * k)
    sigma += 0.5 * (Bb @ Gt).reshape(nb, na, k).transpose(1, 0, 2)
    return sigma.reshape(na * nb, k)


def sigma_apply(ham: ActiveSpaceHamiltonian, space: DeterminantSpace, c: np.ndarray) -> np.ndarray:
    """Matrix-free H c, core energy included."""
    c = np.asarray(c, dtype=float)
    if c.size != space.size:
        raise ShapeError(f"vector of length {c.size} for a space of {space.size} determinants")
    return _sigma_block(ham, space, c.reshape(-1, 1))[:, 0]


def hamiltonian_diagonal(ham: ActiveSpaceHamiltonian, space: DeterminantSpace) -> np.ndarray:
    n = ham.n_orbitals
    bits = np.arange(n)
    oa = ((space.alpha[:, None] >> bits) & 1).astype(float)
    ob = ((space.beta[:, None] >> bits) & 1).astype(float)
    J = np.einsum("iijj->ij", ham.h2_active)
    K = np.einsum("ijji->ij", ham.h2_active)
    hd = np.diag(ham.eff_h1)
    ea = oa @ hd + 0.5 * np.einsum("ai,ij,aj->a", oa, J - K, oa)
    eb = ob @ hd + 0.5 * np.einsum("bi,ij,bj->b", ob, J - K, ob)
    return (ham.eff_core + ea[:, None] + eb[None, :] + oa @ J @ ob.T).ravel()


def hamiltonian_matrix(ham: ActiveSpaceHamiltonian, space: DeterminantSpace, chunk: int = 64) -> np.ndarray:
    """Dense H assembled from the sigma routine applied to blocks of unit vectors."""
    m = space.size
    H = np.empty((m, m))
    for k0 in range(0, m, chunk):
        k1 = min(m, k0 + chunk)
        E = np.zeros((m, k1 - k0))
        E[np.arange(k0, k1), np.arange(k1 - k0)] = 1.0
        H[:, k0:k1] = _sigma_block(ham, space, E)
    return 0.5 * (H + H.T)


def slater_condon_matrix(ham: ActiveSpaceHamiltonian, space: DeterminantSpace) -> np.ndarray:
    """Dense H from the Slater-Condon rules over spin-orbital determinants.

    Independent of the string machinery used by :func:`sigma_apply`; meant
    for small spaces and for checking the fast path.
    """
    n = ham.n_orbitals
    ns = 2 * n
    h1 = np.zeros((ns, ns))
    h1[:n, :n] = h1[n:, n:] = ham.eff_h1
    g = np.zeros((ns,) * 4)  # <PQ|RS> with P = spatial + n * spin
    for s1 in (0, 1):
        for s2 in (0, 1):
            g[s1 * n:(s1 + 1) * n, s2 * n:(s2 + 1) * n, s1 * n:(s1 + 1) * n, s2 * n:(s2 + 1) * n] = \
                ham.h2_active.transpose(0, 2, 1, 3)
    anti = g - g.transpose(0, 1, 3, 2)
    dets = [int(d) for d in space.dets]
    occs = [[p for p in range(ns) if d >> p & 1] for d in dets]
    m = len(dets)
    H = np.zeros((m, m))
    for a in range(m):
        oa = occs[a]
        H[a, a] = ham.eff_core + sum(h1[i, i] for i in oa) + 0.5 * sum(anti[i, j, i, j] for i in oa for j in oa)
        for b in range(a + 1, m):
            diff = dets[a] ^ dets[b]
            nd = bin(diff).count("1")
            if nd > 4:
                continue
            holes = [p for p in range(ns) if (dets[b] >> p & 1) and (diff >> p & 1)]
            parts = [p for p in range(ns) if (dets[a] >> p & 1) and (diff >> p & 1)]
            # |a> = sign * excitation(parts <- holes) |b>
            sign, cur = 1, dets[b]
            for h in holes:
                sign *= -1 if bin(cur & ((1 << h) - 1)).count("1") & 1 else 1
                cur ^= 1 << h
            for p in reversed(parts):
                sign *= -1 if bin(cur & ((1 << p) - 1)).count("1") & 1 else 1
                cur ^= 1 << p
            if nd == 2:
                (i,), (p,) = holes, parts
                common = [k for k in occs[b] if k != i]
                val = h1[p, i] + sum(anti[p, k, i, k] for k in common)
            else:
                i, j = holes
                p, q = parts
                val = anti[p, q, i, j]
            H[a, b] = H[b, a] = sign * val
    return H


@dataclass(frozen=True)
class DavidsonConfig:
    max_subspace: int = 20
    tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        if self.tol <= 0 or self.max_subspace < 2:
            raise ValueError("Davidson needs tol > 0 and max_subspace >= 2")


def davidson_lowest(ham: ActiveSpaceHamiltonian, space: DeterminantSpace,
                    cfg: DavidsonConfig = DavidsonConfig()):
    """Lowest eigenpair of H, seeded with the Hartree-Fock determinant.

    Spaces below ``DENSE_LIMIT`` determinants are diagonalised densely.
    """
    m = space.size
    if m == 0:
        raise ValueError("empty determinant space")
    if m == 1:
        return float(hamiltonian_diagonal(ham, space)[0]), np.ones(1)
    if m < DENSE_LIMIT:
        w, v = np.linalg.eigh(hamiltonian_matrix(ham, space))
        c = v[:, 0] * (1.0 if v[space.hf_index, 0] >= 0 else -1.0)
        return float(w[0]), c

    diag = hamiltonian_diagonal(ham, space)
    V = space.hf_vector()[:, None]
    S = sigma_apply(ham, space, V[:, 0])[:, None]
    best = np.inf
    for _ in range(cfg.max_iter):
        h = V.T @ S
        w, y = np.linalg.eigh(0.5 * (h + h.T))
        e, y0 = w[0], y[:, 0]
        x = V @ y0
        r = S @ y0 - e * x
        rnorm = float(np.linalg.norm(r))
        best = min(best, rnorm)
        if rnorm <= cfg.tol:
            x *= 1.0 if x[space.hf_index] >= 0 else -1.0
            return float(e), x / np.linalg.norm(x)
        denom = diag - e
        denom = np.where(np.abs(denom) < 1e-8, 1e-8, denom)
        t = -r / denom
        if V.shape[1] >= cfg.max_subspace:
            V, S = x[:, None] / np.linalg.norm(x), (S @ y0)[:, None] / np.linalg.norm(x)
        for _ in range(2):
            t -= V @ (V.T @ t)
        tn = np.linalg.norm(t)
        if tn < 1e-14:
            raise ConvergenceError("Davidson subspace collapsed", rnorm)
        t /= tn
        V = np.hstack([V, t[:, None]])
        S = np.hstack([S, sigma_apply(ham, space, t)[:, None]])
    raise ConvergenceError("Davidson did not converge", best)


def solve_increment_fci(ham: ActiveSpaceHamiltonian, cfg: DavidsonConfig = DavidsonConfig()) -> float:
    """FCI correlation energy of an active space, relative to its reference determinant."""
    if ham.n_virtual == 0 or ham.n_occupied == 0:
        return 0.0
    space = DeterminantSpace.for_hamiltonian(ham)
    e, _ = davidson_lowest(ham, space, cfg)
    return min(0.0, e - ham.hf_energy())


def spin_square(c: np.ndarray, space: DeterminantSpace) -> float:
    """<S^2> of a normalised CI vector, via S^2 = S- S+ + Sz (Sz + 1)."""
    n = space.n_orbitals
    sz = 0.5 * (space.n_alpha - space.n_beta)
    C = np.asarray(c).reshape(space.shape)
    if space.n_beta == 0 or space.n_alpha == n:
        return sz * (sz + 1)
    up = make_strings(n, space.n_alpha + 1)
    dn = make_strings(n, space.n_beta - 1)
    up_idx = {int(s): k for k, s in enumerate(up)}
    dn_idx = {int(s): k for k, s in enumerate(dn)}
    out = np.zeros((len(up), len(dn)))
    for p in range(n):
        bit = 1 << p
        below = bit - 1
        ia = [(k, up_idx[int(s) | bit], -1 if bin(int(s) & below).count("1") & 1 else 1)
              for k, s in enumerate(space.alpha) if not int(s) & bit]
        ib = [(k, dn_idx[int(s) ^ bit], -1 if bin(int(s) & below).count("1") & 1 else 1)
              for k, s in enumerate(space.beta) if int(s) & bit]
        if not ia or not ib:
            continue
        a_src, a_dst, a_sg = map(np.array, zip(*ia))
        b_src, b_dst, b_sg = map(np.array, zip(*ib))
        block = C[np.ix_(a_src, b_src)] * a_sg[:, None] * b_sg[None, :]
        np.add.at(out, (a_dst[:, None], b_dst[None, :]), block)
    return float(np.sum(out ** 2) + sz * (sz + 1))
