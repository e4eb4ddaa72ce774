import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mifno.errors import DegeneracyError, PolicyError
from mifno.fci import solve_increment_fci
from mifno.integrals import IntegralStore, fold_spatial
from mifno.mp2_fno import (
    FnoPolicy,
    FnoSubspace,
    VvDensityBlock,
    delta_mp2,
    fno_decompose,
    fno_truncate,
    mp2_energy,
    occupancy_prefix,
    rotate_virtuals,
    transform_virtuals,
    vv_density,
)

from conftest import load


def full(store):
    return fold_spatial(store, [], range(store.n_spatial))


def spaces(ham):
    return ham.occ_spin_orbitals(), ham.virt_spin_orbitals()


def random_orthogonal(n, seed):
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def brute_mp2(ham):
    """Quadruple loop over spin orbitals, 1/4 sum |<IJ||AB>|^2 / denominator."""
    occ, vir = spaces(ham)
    eps = np.repeat(np.diag(ham.fock()), 2)
    g = ham.h2_active

    def anti(P, Q, R, S):
        def d(a, b, c, e):
            return g[a // 2, c // 2, b // 2, e // 2] if a % 2 == c % 2 and b % 2 == e % 2 else 0.0
        return d(P, Q, R, S) - d(P, Q, S, R)

    e2 = 0.0
    for I, J, A, B in itertools.product(occ, occ, vir, vir):
        e2 += 0.25 * anti(I, J, A, B) ** 2 / (eps[I] + eps[J] - eps[A] - eps[B])
    return e2


@pytest.mark.parametrize("name", ["h2_sto3g", "h4_sto3g", "h2o_sto3g", "beh2_ccpvdz"])
def test_mp2_matches_reference(name, ref):
    ham = full(load(name))
    r = mp2_energy(ham, *spaces(ham))
    assert r.e2 == pytest.approx(ref(name)["e_mp2_corr"], abs=1e-8)
    assert r.e2 <= 0
    assert r.e2 == pytest.approx(sum(r.pair_energies.values()), abs=1e-12)


def test_mp2_matches_quadruple_loop(h4):
    ham = full(h4)
    assert mp2_energy(ham, *spaces(ham)).e2 == pytest.approx(brute_mp2(ham), abs=1e-14)


def test_frozen_core_mp2_matches_reference(ref):
    s = load("beh2_ccpvdz")
    ham = fold_spatial(s, [0], range(1, s.n_spatial))
    assert mp2_energy(ham, *spaces(ham)).e2 == pytest.approx(ref("beh2_ccpvdz_fc")["e_mp2_corr"], abs=1e-8)
    fc = full(load("beh2_ccpvdz_fc"))
    assert mp2_energy(fc, *spaces(fc)).e2 == pytest.approx(ref("beh2_ccpvdz_fc")["e_mp2_corr"], abs=1e-8)


def test_no_virtuals_gives_zero(h2):
    ham = full(h2)
    assert mp2_energy(ham, ham.occ_spin_orbitals(), []).e2 == 0.0


def two_orbital_store(h00=-1.2, h11=-0.3, J00=0.6, J11=0.55, J01=0.5, K=0.15):
    h2 = np.zeros((2,) * 4)
    h2[0, 0, 0, 0], h2[1, 1, 1, 1] = J00, J11
    h2[0, 0, 1, 1] = h2[1, 1, 0, 0] = J01
    for p, q, r, s in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)]:
        h2[p, q, r, s] = K
    return IntegralStore(n_spatial=2, n_electrons=2, core_energy=0.0, h1=np.diag([h00, h11]), h2=h2)


def test_two_orbital_mp2_closed_form():
    s = two_orbital_store()
    ham = full(s)
    f = ham.fock()
    gap = f[1, 1] - f[0, 0]
    v = s.eri(0, 1, 0, 1)
    assert mp2_energy(ham, *spaces(ham)).e2 == pytest.approx(-v ** 2 / (2 * gap), abs=1e-15)


def test_two_orbital_fci_closed_form():
    s = two_orbital_store()
    ham = full(s)
    delta = 2 * s.h1[1, 1] + s.eri(1, 1, 1, 1) - 2 * s.h1[0, 0] - s.eri(0, 0, 0, 0)
    v = s.eri(0, 1, 0, 1)
    expect = -(delta / 2) * (np.sqrt(1 + (2 * v / delta) ** 2) - 1)
    assert solve_increment_fci(ham) == pytest.approx(expect, abs=1e-14)


def test_degenerate_denominator():
    # f11 - f00 = h11 - h00 + 2 J01 - K - J00 vanishes for h11 = -1.4
    s = two_orbital_store(h00=-1.0, h11=-1.4, J00=0.5, J11=0.5, J01=0.5, K=0.1)
    ham = full(s)
    assert ham.fock()[1, 1] == pytest.approx(ham.fock()[0, 0], abs=1e-14)
    with pytest.raises(DegeneracyError):
        mp2_energy(ham, *spaces(ham))


def brute_density(ham):
    occ, vir = spaces(ham)
    eps = np.repeat(np.diag(ham.fock()), 2)
    g = ham.h2_active

    def anti(P, Q, R, S):
        def d(a, b, c, e):
            return g[a // 2, c // 2, b // 2, e // 2] if a % 2 == c % 2 and b % 2 == e % 2 else 0.0
        return d(P, Q, R, S) - d(P, Q, S, R)

    def t(I, J, A, B):
        return anti(I, J, A, B) / (eps[I] + eps[J] - eps[A] - eps[B])

    d = np.zeros((len(vir), len(vir)))
    for a, A in enumerate(vir):
        for b, B in enumerate(vir):
            d[a, b] = 0.5 * sum(t(I, J, C, B) * t(I, J, C, A)
                                for C in vir for I in occ for J in occ)
    return d


@pytest.mark.parametrize("name", ["h2_sto3g", "h4_sto3g"])
def test_density_matches_six_index_loop(name):
    ham = full(load(name))
    d = vv_density(ham, *spaces(ham))
    ref = brute_density(ham)
    assert np.trace(d.d) == pytest.approx(np.trace(ref), abs=1e-14)
    assert np.abs(d.d - ref).max() <= 1e-14
    assert d.occupied_context == tuple(ham.occ_spin_orbitals())


@pytest.mark.parametrize("name", ["h2o_sto3g", "beh2_ccpvdz"])
def test_density_invariants(name):
    ham = full(load(name))
    d = vv_density(ham, *spaces(ham)).d
    assert np.abs(d - d.T).max() <= 1e-12
    w = np.linalg.eigvalsh(d)
    assert w.min() >= -1e-10
    assert w.max() <= 2.0 + 1e-10


def test_density_empty_occupied(h2o):
    ham = full(h2o)
    d = vv_density(ham, [], ham.virt_spin_orbitals())
    assert not d.d.any() and d.d.shape == (4, 4)


def test_density_covariant_under_virtual_permutation():
    s = load("h2o_sto3g")
    perm = [0, 1, 2, 3, 4, 6, 5]
    a = fold_spatial(s, [], range(7))
    b = fold_spatial(s, [], perm)
    da = vv_density(a, *spaces(a)).d
    db = vv_density(b, *spaces(b)).d
    # spatial virtuals 5 and 6 swap, i.e. spin-orbital pairs (0,1) <-> (2,3)
    sp = [2, 3, 0, 1]
    assert np.abs(db - da[np.ix_(sp, sp)]).max() <= 1e-15


def test_density_shrinks_with_occupied_context(h2o):
    ham = full(h2o)
    occ, vir = spaces(ham)
    traces = [np.trace(vv_density(ham, occ[: 2 * k], vir).d) for k in range(5, 0, -1)]
    assert all(a >= b - 1e-15 for a, b in zip(traces, traces[1:]))


def test_decompose_diagonal_input():
    s = fno_decompose(VvDensityBlock(np.diag([0.1, 0.3, 0.2]), (), ()))
    assert np.allclose(s.eigenvalues, [0.3, 0.2, 0.1], atol=0)
    assert np.array_equal(np.abs(s.u), np.eye(3)[:, [1, 2, 0]])
    assert not s.spin_paired


def test_decompose_symmetric_pair():
    a, b = 0.4, 0.1
    s = fno_decompose(VvDensityBlock(np.array([[a, b], [b, a]]), (), ()))
    # a 2x2 block reads as spin paired only if the off-diagonal vanishes
    assert np.allclose(s.eigenvalues, [a + b, a - b], atol=1e-15)
    assert np.allclose(np.abs(s.u), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-15)


def test_decompose_ties_keep_original_order():
    s = fno_decompose(VvDensityBlock(np.diag([0.2, 0.5, 0.2]), (), ()))
    assert np.array_equal(np.argmax(np.abs(s.u), axis=0), [1, 0, 2])


def test_decompose_clamps_tiny_negative():
    s = fno_decompose(VvDensityBlock(np.diag([0.3, -5e-11]), (), ()))
    assert s.eigenvalues[-1] == 0.0


@pytest.mark.parametrize("name", ["h2o_sto3g", "beh2_ccpvdz"])
def test_decompose_reconstructs_density(name):
    ham = full(load(name))
    d = vv_density(ham, *spaces(ham))
    s = fno_decompose(d)
    assert s.spin_paired
    assert np.abs(s.u.T @ s.u - np.eye(s.dim)).max() <= 1e-10
    assert np.abs(s.u @ np.diag(s.eigenvalues) @ s.u.T - d.d).max() <= 1e-10
    assert np.all(np.diff(s.eigenvalues) <= 1e-15)
    assert s.occupancy_fraction == 1.0


def spectrum(w):
    """Spin-paired FNO subspace with spatial occupations w."""
    w = np.repeat(np.asarray(w, dtype=float), 2)
    return FnoSubspace(w, np.eye(len(w)), len(w), True)


def test_truncate_exact_boundary():
    s = fno_truncate(spectrum([0.6, 0.3, 0.1]), FnoPolicy(occupancy=0.9))
    assert s.kept_spatial == 2
    assert s.occupancy_fraction == pytest.approx(0.9, abs=1e-15)


def test_truncate_tau_one_keeps_all():
    s = fno_truncate(spectrum([0.6, 0.3, 0.1, 0.0]), FnoPolicy(occupancy=1.0))
    assert s.kept == s.dim and s.occupancy_fraction == 1.0


def test_truncate_keep_count_counts_spatial():
    s = fno_truncate(spectrum([0.6, 0.3, 0.1]), FnoPolicy(keep_count=2))
    assert s.kept == 4 and s.kept_spatial == 2 and s.discarded_spatial == 1


def test_truncate_rounds_up_to_spin_pairs():
    w = np.array([0.6, 0.6, 0.3, 0.3, 0.1, 0.1])
    assert occupancy_prefix(w, 0.25) == 1
    s = fno_truncate(FnoSubspace(w, np.eye(6), 6, True), FnoPolicy(occupancy=0.25))
    assert s.kept == 2


@pytest.mark.parametrize("policy", [FnoPolicy(occupancy=0.0), FnoPolicy(occupancy=1.2),
                                    FnoPolicy(keep_count=0), FnoPolicy(keep_count=4)])
def test_truncate_rejects_bad_policies(policy):
    with pytest.raises(PolicyError):
        fno_truncate(spectrum([0.6, 0.3, 0.1]), policy)


def test_policy_is_exclusive():
    with pytest.raises(PolicyError):
        FnoPolicy(occupancy=0.9, keep_count=3)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12),
       st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_occupancy_prefix_is_nested(w, t1, t2):
    w = sorted(w, reverse=True)
    lo, hi = sorted((t1, t2))
    assert occupancy_prefix(w, lo) <= occupancy_prefix(w, hi) <= len(w)
    if sum(w) > 0:
        k = occupancy_prefix(w, hi)
        assert sum(w[:k]) / sum(w) >= hi - 1e-9
        assert k == 1 or sum(w[:k - 1]) / sum(w) < hi + 1e-12


def test_occupancy_prefix_uniform_spectrum():
    for n in (7, 10, 389):
        for tau in (0.3, 0.5, 0.9, 0.99):
            assert occupancy_prefix(np.ones(n), tau) == int(np.ceil(tau * n - 1e-9))


def test_identity_transform_keeps_integrals(h2o):
    ham = full(h2o)
    s = fno_decompose(VvDensityBlock(np.diag([0.4, 0.4, 0.1, 0.1]), (), ()))
    out = transform_virtuals(ham, s)
    assert np.abs(out.h2_active - ham.h2_active).max() <= 1e-12
    assert np.abs(out.eff_h1 - ham.eff_h1).max() <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_mp2_and_fci_invariant_under_virtual_rotation(seed):
    s = load("h2o_sto3g")
    ham = fold_spatial(s, [0, 1, 2], [3, 4, 5, 6])
    rot = rotate_virtuals(ham, random_orthogonal(2, seed))
    occ, vir = spaces(ham)
    # rotated virtuals are not canonical, so compare after semicanonicalisation
    s_rot = fno_decompose(vv_density(rot, occ, vir))
    back = transform_virtuals(rot, s_rot)
    assert mp2_energy(back, *spaces(back)).e2 == pytest.approx(mp2_energy(ham, occ, vir).e2, abs=1e-10)
    assert solve_increment_fci(rot) == pytest.approx(solve_increment_fci(ham), abs=1e-10)


def test_tau_one_transform_leaves_solver_energy(h2o):
    ham = fold_spatial(h2o, [0, 1], [2, 3, 4, 5, 6])
    s = fno_truncate(fno_decompose(vv_density(ham, *spaces(ham))), FnoPolicy(occupancy=1.0))
    out = transform_virtuals(ham, s)
    assert solve_increment_fci(out) == pytest.approx(solve_increment_fci(ham), abs=1e-10)
    assert delta_mp2(ham, out) == pytest.approx(0.0, abs=1e-12)


def test_truncated_space_is_variationally_higher(h2o):
    ham = full(h2o)
    s = fno_decompose(vv_density(ham, *spaces(ham)))
    e_full = solve_increment_fci(ham)
    e_trunc = solve_increment_fci(transform_virtuals(ham, fno_truncate(s, FnoPolicy(keep_count=1))))
    assert e_trunc >= e_full


def test_delta_mp2_identity_and_bounds(h2o):
    ham = full(h2o)
    occ, vir = spaces(ham)
    s = fno_truncate(fno_decompose(vv_density(ham, occ, vir)), FnoPolicy(occupancy=0.99))
    out = transform_virtuals(ham, s)
    d = delta_mp2(ham, out)
    e_mo = mp2_energy(ham, occ, vir).e2
    e_fno = mp2_energy(out, *spaces(out)).e2
    assert e_fno + d == pytest.approx(e_mo, abs=1e-12)
    assert d <= 0 and abs(d) <= abs(e_mo)


def test_delta_mp2_with_no_virtuals_kept(h2o):
    ham = full(h2o)
    occ, vir = spaces(ham)
    empty = fold_spatial(h2o, [], range(5))
    assert delta_mp2(ham, empty) == mp2_energy(ham, occ, vir).e2


def test_semicanonical_virtual_block(beh2):
    ham = fold_spatial(beh2, [0, 2], [1] + list(range(3, beh2.n_spatial)))
    s = fno_truncate(fno_decompose(vv_density(ham, *spaces(ham))), FnoPolicy(keep_count=7))
    out = transform_virtuals(ham, s)
    f = out.fock()
    off = f - np.diag(np.diag(f))
    assert np.abs(off[1:, 1:]).max() <= 1e-10
    assert out.n_virtual == 7 and out.labels[0] == 1


def test_nested_thresholds_give_nested_kept_sets(beh2):
    ham = fold_spatial(beh2, [0, 1], [2] + list(range(3, beh2.n_spatial)))
    s = fno_decompose(vv_density(ham, *spaces(ham)))
    prev = 0
    for tau in (0.5, 0.9, 0.99, 0.999, 1.0):
        k = fno_truncate(s, FnoPolicy(occupancy=tau)).kept
        assert k >= prev
        prev = k
