import json
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_stopping_sets, termatiko_by_ipa

from ipafail.failsets import companion_set, is_stopping_set, is_termatiko_graph
from ipafail.search import (Budget, BudgetExceeded, CrossValidationError, brute_force_termatiko,
                            contained_in_stopping_set, cyclic_shift_order, ensemble_stats, enumerate_stopping_sets,
                            heuristic_termatiko, iter_stopping_sets, minimum_stopping_set_size)
from ipafail.tanner import builtin_instance, gen_array_ldpc, gen_protograph_lift, random_binary_matrix


def rand_matrix(seed, m=6, n=10):
    return random_binary_matrix(m, n, (2, 3), np.random.default_rng(seed))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_stopping_enumeration_matches_naive(seed):
    A = rand_matrix(seed, 7, 12)
    res = enumerate_stopping_sets(A, A.n)
    assert res.complete
    assert res.sets == naive_stopping_sets(A.to_dense(), A.n)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6))
def test_stopping_enumeration_threshold(seed, tau):
    A = rand_matrix(seed, 7, 12)
    full = enumerate_stopping_sets(A, A.n).sets
    assert enumerate_stopping_sets(A, tau).sets == [s for s in full if len(s) <= tau]
    assert list(iter_stopping_sets(A, tau)) == [s for s in full if len(s) <= tau]


def test_stopping_enumeration_array_code():
    A = gen_array_ldpc(5)
    res = enumerate_stopping_sets(A, 6)
    assert res.complete and res.s_min == 6
    assert len(set(res.sets)) == len(res.sets)
    assert res.sets == sorted(res.sets)
    assert all(is_stopping_set(A, s) for s in res.sets)
    assert minimum_stopping_set_size(A, 8) == (6, True)
    assert minimum_stopping_set_size(A, 5) == (None, True)


def test_stopping_enumeration_threads_agree():
    A = gen_array_ldpc(7)
    assert enumerate_stopping_sets(A, 6, threads=3).sets == enumerate_stopping_sets(A, 6).sets


def test_stopping_budget_flags_incomplete():
    A = gen_array_ldpc(11)
    res = enumerate_stopping_sets(A, 8, budget=Budget(max_nodes=50))
    assert not res.complete
    assert all(is_stopping_set(A, s) for s in res.sets)
    res = enumerate_stopping_sets(A, 8, budget=Budget(seconds=0.0))
    assert not res.complete


def test_contained_in_stopping_set():
    inst = builtin_instance("fig5")
    assert contained_in_stopping_set(inst.matrix, [3], 2)
    assert contained_in_stopping_set(inst.matrix, [0], 4)
    assert not contained_in_stopping_set(inst.matrix, [0], 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_brute_force_matches_slow_oracle(seed):
    A = rand_matrix(seed)
    res = brute_force_termatiko(A, 4)
    expect = {k: [T for T in combinations(range(10), k) if termatiko_by_ipa(A.to_dense(), T)]
              for k in range(1, 5)}
    for k in range(1, 5):
        assert [tuple(r) for r in res.by_size[k].tolist()] == expect[k]
        assert res.spectrum.count(k) == len(expect[k])
    for T in res.sets:
        cls = is_termatiko_graph(A, T).cls
        assert res.class_of(T) == int(cls.value[1])


def test_brute_force_array_p5_frozen():
    res = brute_force_termatiko(gen_array_ldpc(5), 4, cross_validate=0.05, seed=1)
    spec = res.spectrum
    assert spec.exact == {1: True, 2: True, 3: True, 4: True}
    assert [spec.count(k) for k in (1, 2, 3, 4)] == [0, 0, 100, 1225]  # slow IPA oracle over all subsets
    assert spec.t2 == {1: 0, 2: 0, 3: 0, 4: 0}
    assert spec.h_min == 3
    assert res.cross_checked > 0


def test_brute_force_collect_subset_and_threads():
    A = gen_array_ldpc(7)
    full = brute_force_termatiko(A, 3)
    part = brute_force_termatiko(A, 3, collect=[3], threads=2)
    assert set(part.by_size) == {3}
    assert np.array_equal(part.by_size[3], full.by_size[3])
    none = brute_force_termatiko(A, 3, collect=False)
    assert none.by_size == {}
    assert none.spectrum.t1 == full.spectrum.t1


def test_brute_force_budget():
    A = gen_array_ldpc(11)
    with pytest.raises(BudgetExceeded):
        brute_force_termatiko(A, 4, budget=Budget(max_candidates=1000))
    res = brute_force_termatiko(A, 3, budget=Budget(seconds=0.0))
    assert not res.spectrum.complete and not any(res.spectrum.exact.values())
    with pytest.raises(ValueError):
        brute_force_termatiko(A, 0)


def test_cross_validation_detects_disagreement(monkeypatch):
    import ipafail.search as search
    monkeypatch.setattr(search, "is_termatiko_ipa", lambda matrix, row: False)
    with pytest.raises(CrossValidationError):
        brute_force_termatiko(gen_array_ldpc(5), 3, cross_validate=0.01)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 10))
def test_heuristic_bounded_by_brute(seed, tau):
    A = rand_matrix(seed)
    brute = brute_force_termatiko(A, 4)
    exact = set(brute.sets)
    for strategy in ("subsets", "containment"):
        heur = heuristic_termatiko(A, tau, kmax=4, strategy=strategy)
        assert set(heur.sets) <= exact
        for k in range(1, 5):
            assert heur.spectrum.count(k) <= brute.spectrum.count(k)
        for T in heur.sets:
            assert heur.class_of(T) == brute.class_of(T)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_heuristic_strategies_agree_and_grow_with_tau(seed):
    A = rand_matrix(seed, 7, 12)
    prev = set()
    for tau in range(1, A.n + 1):
        sub = heuristic_termatiko(A, tau, kmax=4)
        con = heuristic_termatiko(A, tau, kmax=4, strategy="containment")
        assert list(sub.sets) == list(con.sets)
        assert sub.spectrum.s_min == con.spectrum.s_min
        assert prev <= set(sub.sets)
        prev = set(sub.sets)
    # with tau = n every termatiko set lies inside T | S, a stopping set
    assert prev == set(brute_force_termatiko(A, 4).sets)


def test_heuristic_array_p5_exact_at_size_three():
    A = gen_array_ldpc(5)
    heur = heuristic_termatiko(A, 8)
    brute = brute_force_termatiko(A, 3)
    assert heur.spectrum.count(3) == brute.spectrum.count(3) == 100
    assert heur.spectrum.s_min == 6 and heur.spectrum.h_min == 3
    assert not any(heur.spectrum.exact.values())


def test_cyclic_shift_order():
    assert cyclic_shift_order(gen_array_ldpc(11)) == 11
    assert cyclic_shift_order(gen_protograph_lift([[3, 3]], 20, seed=1)) == 20
    assert cyclic_shift_order(builtin_instance("fig5").matrix) == 1
    assert cyclic_shift_order(rand_matrix(3, 6, 12)) == 1


@pytest.mark.parametrize("A", [gen_array_ldpc(7), gen_protograph_lift([[3, 3]], 12, seed=4)],
                         ids=["array7", "lift12"])
def test_containment_symmetry_reduction_is_exact(A):
    sym = heuristic_termatiko(A, 8, kmax=4, strategy="containment")
    plain = heuristic_termatiko(A, 8, kmax=4, strategy="containment", symmetry=False)
    sub = heuristic_termatiko(A, 8, kmax=4)
    assert list(sym.sets) == list(plain.sets) == list(sub.sets)
    for k in sym.classes:
        assert np.array_equal(sym.classes[k], plain.classes[k])


def test_heuristic_errors():
    A = gen_array_ldpc(5)
    with pytest.raises(ValueError):
        heuristic_termatiko(A, 0)
    with pytest.raises(ValueError):
        heuristic_termatiko(A, 6, strategy="containment")
    with pytest.raises(ValueError):
        heuristic_termatiko(A, 6, strategy="nope")


def test_spectrum_json_layout():
    doc = brute_force_termatiko(gen_array_ldpc(5), 3).spectrum.to_json()
    assert json.loads(json.dumps(doc)) == doc
    assert set(doc) >= {"method", "tau", "sizes", "h_min", "s_min"}
    assert doc["sizes"][2] == {"k": 3, "t1": 100, "t2": 0, "exact": True}


def test_termatiko_sets_inside_stopping_sets():
    A = rand_matrix(11, 7, 12)
    stopping = [set(s) for s in enumerate_stopping_sets(A, A.n).sets]
    for T in brute_force_termatiko(A, 5).sets:
        _, S = companion_set(A, T)
        assert is_stopping_set(A, T | S)
        assert any(T <= s for s in stopping)


def test_ensemble_small():
    stats = ensemble_stats([[3, 3]], 20, 3, 6, 3, 5)
    assert [r.seed for r in stats.rows] == [5, 6, 7]
    for r in stats.rows:
        A = gen_protograph_lift([[3, 3]], 20, r.seed)
        assert r.s_min == minimum_stopping_set_size(A, 6)[0]
        assert r.h_min == min(h for h in (r.h_min_heuristic, r.h_min_brute) if h is not None)
        assert r.h_min <= r.s_min
    csv = stats.to_csv().splitlines()
    assert csv[0] == "index,seed,s_min,h_min,h_min_heuristic,h_min_brute,complete"
    assert csv[-1].startswith("mean,,") and len(csv) == 5
    assert stats.to_csv() == ensemble_stats([[3, 3]], 20, 3, 6, 3, 5).to_csv()
    with pytest.raises(ValueError):
        ensemble_stats([[3, 3]], 20, 0, 6, 3, 5)
