import itertools
import threading
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mifno.errors import ConsistencyError, DependencyError, IncompleteExpansion, OrderError
from mifno.fci import solve_increment_fci
from mifno.increments import (
    FAILED,
    SCREENED,
    Increment,
    IncrementLedger,
    count_increments,
    enumerate_increments,
    increment_epsilon,
    increments_of_order,
    reconstruct,
    reduce_order,
    screen,
)
from mifno.integrals import fold_spatial

from conftest import random_store


def subset_energy(store, subset):
    """E_c of the space spanned by ``subset`` of the occupied orbitals plus all virtuals."""
    n_occ = store.n_occupied
    frozen = [i for i in range(n_occ) if i not in subset]
    active = list(subset) + list(range(n_occ, store.n_spatial))
    return solve_increment_fci(fold_spatial(store, frozen, active))


def solved_ledger(store, n, perm=None):
    n_occ = store.n_occupied
    perm = list(range(n_occ)) if perm is None else perm
    led = IncrementLedger(n_occ)
    for s in enumerate_increments(n_occ, n):
        led.record_ec(s, subset_energy(store, sorted(perm[i] for i in s)))
    return led


def test_increment_validation():
    assert Increment([1, 3]).order == 2
    assert Increment([1, 3]).occ_subset == (1, 3)
    with pytest.raises(ValueError):
        Increment([3, 1])
    with pytest.raises(ValueError):
        Increment([1, 1])
    with pytest.raises(ValueError):
        Increment([-1])


def test_labels():
    assert Increment([1, 2]).label() == "two-body (2,3)"
    assert Increment([0]).label(one_based=False) == "one-body (0)"


def test_proper_subsets_order():
    assert list(Increment([0, 1, 2]).proper_subsets()) == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]


@pytest.mark.parametrize("n_occ, n, count", [(3, 2, 6), (5, 3, 25), (5, 4, 30), (89, 3, 117_569)])
def test_counts(n_occ, n, count):
    assert count_increments(n_occ, n) == count


def test_enumeration_order():
    incs = enumerate_increments(3, 2)
    assert incs == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]
    assert len(enumerate_increments(5, 4)) == 30


@given(st.integers(1, 12), st.integers(1, 12))
def test_enumeration_matches_binomial_sum(n_occ, n):
    if n > n_occ:
        with pytest.raises(OrderError):
            enumerate_increments(n_occ, n)
        return
    incs = enumerate_increments(n_occ, n)
    assert len(incs) == sum(comb(n_occ, m) for m in range(1, n + 1))
    assert len(set(incs)) == len(incs)
    assert [len(s) for s in incs] == sorted(len(s) for s in incs)
    assert all(s[-1] < n_occ for s in incs)


def test_order_errors():
    with pytest.raises(OrderError):
        enumerate_increments(3, 0)
    with pytest.raises(OrderError):
        increments_of_order(3, 4)


def test_epsilon_arithmetic():
    led = IncrementLedger(2)
    led.record_ec((0,), -0.10)
    led.record_ec((1,), -0.15)
    led.record_ec((0, 1), -0.30)
    assert increment_epsilon(led, (0,)) == -0.10
    assert increment_epsilon(led, (1,)) == -0.15
    assert increment_epsilon(led, (0, 1)) == pytest.approx(-0.05, abs=1e-15)


def test_epsilon_needs_subsets():
    led = IncrementLedger(2)
    led.record_ec((0, 1), -0.3)
    with pytest.raises(DependencyError):
        increment_epsilon(led, (0, 1))
    with pytest.raises(DependencyError):
        increment_epsilon(led, (0,))


def test_epsilon_is_bit_reproducible():
    rng = np.random.default_rng(7)
    led = IncrementLedger(5)
    for s in enumerate_increments(5, 4):
        led.record_ec(s, float(rng.normal()))
    first = [reconstruct(led, 4).e_corr, dict(led.eps)]
    led.eps.clear()
    second = [reconstruct(led, 4).e_corr, dict(led.eps)]
    assert first == second


@given(st.lists(st.floats(-1, 1), min_size=15, max_size=15))
def test_full_expansion_telescopes_to_top_energy(values):
    led = IncrementLedger(4)
    for s, v in zip(enumerate_increments(4, 4), values):
        led.record_ec(s, v)
    r = reconstruct(led, 4)
    assert r.e_corr == pytest.approx(values[-1], abs=1e-10)
    assert r.e_corr == pytest.approx(sum(r.per_order_sums.values()), abs=1e-12)


def test_telescoping_with_fci_on_four_occupied_toy():
    s = random_store(6, 8, seed=11)
    led = solved_ledger(s, 4)
    r = reconstruct(led, 4, e_hf=1.5)
    full = solve_increment_fci(fold_spatial(s, [], range(6)))
    assert r.e_corr == pytest.approx(full, abs=1e-10)
    assert r.e_total == r.e_hf + r.e_corr
    assert len(led.eps) == 15


def test_single_occupied_system(h2):
    led = solved_ledger(h2, 1)
    assert reconstruct(led, 1).e_corr == led.ec[(0,)]


def test_h2o_full_expansion_reproduces_fci(h2o, ref):
    led = solved_ledger(h2o, 5)
    r = reconstruct(led, 5, e_hf=ref("h2o_sto3g")["e_hf"])
    assert r.e_total == pytest.approx(ref("h2o_sto3g")["e_fci"], abs=1e-8)


def test_truncated_expansions_converge_on_h2o(h2o, ref):
    led = solved_ledger(h2o, 5)
    e_fci = ref("h2o_sto3g")["e_fci"] - ref("h2o_sto3g")["e_hf"]
    errors = [abs(reconstruct(led, n).e_corr - e_fci) for n in range(1, 6)]
    assert errors[-1] < 1e-10
    assert all(b <= a for a, b in zip(errors, errors[1:]))


def test_permutation_invariance():
    s = random_store(5, 6, seed=2)
    a = reconstruct(solved_ledger(s, 2), 2).e_corr
    b = reconstruct(solved_ledger(s, 2, perm=[2, 0, 1]), 2).e_corr
    assert a == pytest.approx(b, abs=1e-12)


def test_incomplete_expansion_lists_missing():
    led = IncrementLedger(3)
    for s in enumerate_increments(3, 1):
        led.record_ec(s, -0.1)
    led.record_ec((0, 1), -0.25)
    led.mark((0, 2), FAILED)
    with pytest.raises(IncompleteExpansion) as info:
        reconstruct(led, 2)
    assert sorted(info.value.missing) == [(0, 2), (1, 2)]
    assert reconstruct(led, 1).e_corr == pytest.approx(-0.3, abs=1e-15)


def test_record_conflict():
    led = IncrementLedger(2)
    led.record_ec((0,), -0.1)
    led.record_ec((0,), -0.1 + 1e-12)
    with pytest.raises(ConsistencyError):
        led.record_ec((0,), -0.1 + 1e-8)


def test_concurrent_inserts():
    led = IncrementLedger(6)
    incs = enumerate_increments(6, 3)
    errors = []

    def worker(offset):
        try:
            for s in incs[offset::2] + incs:
                led.record_ec(s, -0.01 * sum(s) - 0.001)
        except ConsistencyError as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors and len(led.ec) == len(incs)

    clash = []

    def conflicting(value):
        try:
            led.record_ec((0,), value)
        except ConsistencyError as exc:
            clash.append(exc)

    threads = [threading.Thread(target=conflicting, args=(v,)) for v in (5.0, 6.0)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(clash) == 2


def test_pending():
    led = IncrementLedger(3)
    led.record_ec((0,), -0.1)
    led.mark_screened((1,))
    led.mark((2,), FAILED)
    assert led.pending(enumerate_increments(3, 1)) == [(2,)]


def _ledger_with_pairs(values):
    led = IncrementLedger(3)
    for s in enumerate_increments(3, 2):
        led.record_ec(s, values.get(s, 0.0))
    for m in (1, 2):
        reduce_order(led, m)
    return led


def test_zero_threshold_prunes_nothing():
    led = _ledger_with_pairs({})
    assert screen(led, 0.0, 3) == increments_of_order(3, 3)
    assert screen(led, 1.0, 1) == increments_of_order(3, 1)


def test_all_small_pairs_prune_everything():
    led = _ledger_with_pairs({(0,): -0.1, (1,): -0.1, (2,): -0.1,
                              (0, 1): -0.2, (0, 2): -0.2, (1, 2): -0.2})
    assert screen(led, 1e-3, 3) == []
    assert led.status[(0, 1, 2)] == SCREENED and led.eps[(0, 1, 2)] == 0.0
    assert reconstruct(led, 3).e_corr == pytest.approx(-0.3, abs=1e-15)


def test_one_large_pair_keeps_its_superset():
    led = _ledger_with_pairs({(0,): -0.1, (1,): -0.1, (2,): -0.1, (0, 1): -0.25})
    assert screen(led, 1e-3, 3) == [(0, 1, 2)]


def test_screen_needs_reduced_lower_order():
    led = IncrementLedger(3)
    with pytest.raises(DependencyError):
        screen(led, 1e-3, 2)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_screening_error_bound_on_four_occupied_toy(seed):
    s = random_store(6, 8, seed=seed)
    exact = solved_ledger(s, 3)
    ref = reconstruct(exact, 3).e_corr

    thr = 1e-6
    led = IncrementLedger(4)
    for m in (1, 2, 3):
        for inc in screen(led, thr, m):
            led.record_ec(inc, exact.ec[inc])
        reduce_order(led, m)
    pruned = sum(1 for v in led.status.values() if v == SCREENED)
    assert abs(reconstruct(led, 3).e_corr - ref) <= max(pruned, 1) * thr * 10
    if pruned == 0:
        assert reconstruct(led, 3).e_corr == ref


def test_subset_energies_are_size_ordered(h2o):
    # larger active spaces recover more correlation in this minimal basis
    for a, b in itertools.combinations(range(5), 2):
        pair = subset_energy(h2o, (a, b))
        assert pair <= min(subset_energy(h2o, (a,)), subset_energy(h2o, (b,))) + 1e-12
