import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capacitylab.errors import DegenerateCell, SupportViolation
from capacitylab.space import PointSet, ProductTreeSpace
from capacitylab.steprans import (
    DerivedCapacity,
    MaxNorm,
    NormTower,
    TableNorm,
    WeightedP,
    capacity,
    capacity_exact,
    check_good_norm,
    check_ratio_claim,
    density_set,
    eval_step,
    iterate,
    ratio_deviation,
    refine_step,
    relative_norm,
    strong_subadd_search,
    tilde_report,
    tilde_steprans,
)


def tower(arities, *norms):
    return NormTower(ProductTreeSpace(tuple(arities)), tuple(norms))


def uniform_tower(arities, p=1.0):
    return tower(arities, *(WeightedP.uniform(k, p) for k in arities))


def level_choices(k):
    return {
        "max": MaxNorm(k),
        "u1": WeightedP.uniform(k),
        "u2": WeightedP.uniform(k, 2.0),
        "skew3": WeightedP([1 / (k + 1)] * (k - 1) + [2 / (k + 1)], 3.0),
        "inf": WeightedP.uniform(k, math.inf),
    }


def all_towers(arities, names=None):
    names = names or ("max", "u1", "u2", "skew3", "inf")
    for combo in itertools.product(names, repeat=len(arities)):
        yield combo, tower(arities, *(level_choices(k)[c] for c, k in zip(combo, arities)))


# -- norms and iteration ----------------------------------------------------


def test_iterate_uniform_point():
    u = WeightedP.uniform(2)
    k = iterate(u, u)
    assert k(np.array([1, 0, 0, 0])) == pytest.approx(0.25)
    assert k(np.ones(4)) == pytest.approx(1.0)


def test_iterate_max_max_indicator():
    k = iterate(MaxNorm(2), MaxNorm(3))
    for m in range(1, 64):
        f = np.array([(m >> i) & 1 for i in range(6)], dtype=float)
        assert k(f) == 1.0
    assert k(np.zeros(6)) == 0.0


def test_iterated_norm_is_good():
    k = iterate(WeightedP([0.3, 0.7], 2.0), iterate(MaxNorm(2), WeightedP.uniform(3, 1.5)))
    assert check_good_norm(k, trials=100) == []


@pytest.mark.parametrize(
    "norm",
    [WeightedP.uniform(4), WeightedP([0.1, 0.2, 0.7], 3.0), WeightedP.uniform(3, math.inf), MaxNorm(5)],
    ids=["wp1", "wp3", "wpinf", "max"],
)
def test_basic_norms_are_good(norm):
    assert check_good_norm(norm) == []


def test_weighted_validation():
    with pytest.raises(ValueError):
        WeightedP([0.5, 0.6])
    with pytest.raises(ValueError):
        WeightedP([0.5, 0.5], p=0.5)
    with pytest.raises(ValueError):
        WeightedP([1.5, -0.5])
    assert not WeightedP([1.0, 0.0]).strict


def test_table_norm_covering_extension():
    # values on indicators of {0}, {1}, {0,1}
    n = TableNorm(2, {1: 0.6, 2: 0.6, 3: 1.0})
    assert n.consistent
    assert n(np.array([1.0, 0.0])) == pytest.approx(0.6)
    assert n(np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert n(np.array([1.0, 0.5])) == pytest.approx(0.8)
    assert check_good_norm(n, trials=50) == []


def test_table_norm_rejects_bad_tables():
    with pytest.raises(ValueError):
        TableNorm(3, {1: 1.0, 2: 1.0})  # point 2 not covered
    with pytest.raises(ValueError):
        TableNorm(2, {3: 0.5})  # n(1) != 1


# -- step functions ----------------------------------------------------------


def test_eval_step_examples():
    t = uniform_tower((2, 3, 2))
    assert eval_step(t, np.ones(12), 2) == pytest.approx(1.0)
    single = np.zeros(12)
    single[5] = 1
    assert eval_step(t, single, 2) == pytest.approx(1 / 12)
    assert eval_step(t, np.zeros(12), 2) == 0.0
    with pytest.raises(ValueError):
        eval_step(t, np.ones(2), 3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=6, max_size=6), st.sampled_from(["max", "u1", "u2", "skew3", "inf"]))
def test_eval_step_level_independent(values, name):
    t = tower((2, 3, 2), WeightedP([0.25, 0.75], 2.0), level_choices(3)[name], MaxNorm(2))
    f1 = np.array(values)
    f2 = refine_step(t, f1, 1)
    assert eval_step(t, f1, 1) == pytest.approx(eval_step(t, f2, 2), rel=1e-12, abs=1e-12)


# -- derived capacities --------------------------------------------------------


def test_capacity_examples():
    c = DerivedCapacity(uniform_tower((2, 2)))
    S = c.space
    assert capacity(c, PointSet.from_leaves(S, [(0, 0)])) == pytest.approx(0.25)
    assert capacity(c, PointSet.empty(S)) == 0.0
    assert capacity(c, PointSet.full(S)) == pytest.approx(1.0)
    mixed = DerivedCapacity(tower((2, 2), MaxNorm(2), WeightedP.uniform(2)))
    assert mixed(PointSet.from_leaves(S, [(0, 0)])) == pytest.approx(0.5)
    assert mixed(PointSet.from_leaves(S, [(0, 0), (1, 0), (1, 1)])) == pytest.approx(1.0)


def test_capacity_wrong_space():
    c = DerivedCapacity(uniform_tower((2, 2)))
    with pytest.raises(ValueError):
        c(PointSet.full(ProductTreeSpace((2, 3))))


def test_capacity_exact_matches_float():
    t = tower((2, 3), WeightedP([Fraction(1, 3), Fraction(2, 3)]), WeightedP([Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]))
    c = DerivedCapacity(t)
    assert t.rational
    for m in range(64):
        A = PointSet(c.space, m)
        exact = capacity_exact(c, A)
        assert isinstance(exact, Fraction)
        assert float(exact) == pytest.approx(c(A), abs=1e-15)
    assert capacity_exact(c, PointSet.from_leaves(c.space, [(1, 0)])) == Fraction(1, 3)


def test_capacity_exact_rejects_irrational_tower():
    c = DerivedCapacity(uniform_tower((2, 2), p=2.0))
    with pytest.raises(ValueError):
        capacity_exact(c, PointSet.full(c.space))


def test_table_matches_pointwise():
    c = DerivedCapacity(tower((2, 3), MaxNorm(2), WeightedP([0.2, 0.3, 0.5], 2.0)))
    table = c.table()
    for m in range(64):
        assert table[m] == pytest.approx(c(PointSet(c.space, m)), abs=1e-15)


@pytest.mark.parametrize("arities", [(2, 2), (3, 2), (2, 2, 2)])
def test_submeasure_axioms_exhaustive(arities):
    for combo, t in all_towers(arities):
        table = DerivedCapacity(t).table()
        n = 1 << t.space.n_leaves
        assert table[0] == 0.0
        assert table[n - 1] == pytest.approx(1.0)
        masks = np.arange(n)
        for a in range(n):
            # monotone and subadditive against every b
            sub = (masks & a) == masks
            assert np.all(table[masks[sub]] <= table[a] + 1e-12), combo
            assert np.all(table[a | masks] <= table[a] + table[masks] + 1e-12), combo


# -- relative norms and the ratio claim ----------------------------------------


def test_relative_norm_examples():
    t = uniform_tower((2, 2))
    S = t.space
    assert relative_norm(t, (0,), PointSet.from_paths(S, [(0,)])) == pytest.approx(1.0)
    assert relative_norm(t, (0,), PointSet.from_leaves(S, [(0, 0)])) == pytest.approx(0.5)
    assert relative_norm(t, (0,), np.zeros(4)) == 0.0
    assert relative_norm(t, (0, 1), PointSet.from_leaves(S, [(0, 1)])) == 1.0
    with pytest.raises(SupportViolation):
        relative_norm(t, (0,), PointSet.from_leaves(S, [(1, 0)]))


def test_ratio_claim_examples():
    t = tower((2, 3), WeightedP([0.4, 0.6], 2.0), MaxNorm(3))
    S = t.space
    f = np.zeros(6)
    f[3:] = [0.2, -1.5, 0.7]
    assert check_ratio_claim(t, (1,), f)
    assert check_ratio_claim(t, (), f)
    assert ratio_deviation(t, (1, 1), PointSet.from_leaves(S, [(1, 1)])) == pytest.approx(0.0, abs=1e-12)


def test_ratio_claim_degenerate_cell():
    t = tower((2, 2), WeightedP([1.0, 0.0]), WeightedP.uniform(2))
    f = np.array([0.0, 0.0, 1.0, 0.0])
    with pytest.raises(DegenerateCell):
        ratio_deviation(t, (1,), f)


def test_ratio_claim_random_weighted():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        arities = tuple(rng.integers(2, 4, size=rng.integers(1, 4)))
        norms = []
        for k in arities:
            w = rng.uniform(0.1, 1, size=k)
            norms.append(WeightedP(w / w.sum(), float(rng.choice([1.0, 2.0, 3.5, math.inf]))))
        t = tower(arities, *norms)
        S = t.space
        depth = int(rng.integers(0, S.depth + 1))
        path = tuple(int(rng.integers(0, k)) for k in arities[:depth])
        lo, hi = S.block(path)
        f = np.zeros(S.n_leaves)
        f[lo:hi] = rng.normal(size=hi - lo)
        worst = max(worst, ratio_deviation(t, path, f))
    assert worst <= 1e-9


# -- density sets and tilde ----------------------------------------------------


def test_density_set_examples():
    c = DerivedCapacity(uniform_tower((2, 2)))
    S = c.space
    full = PointSet.full(S)
    assert density_set(c, full, 0.5) == full
    assert density_set(c, PointSet.empty(S), 0.5) == PointSet.empty(S)
    # {00, 01, 10}: the root has density 3/4, so a loose epsilon swallows 11
    A = PointSet.from_leaves(S, [(0, 0), (0, 1), (1, 0)])
    assert density_set(c, A, 0.5) == full
    assert density_set(c, A, 0.1) == A
    with pytest.raises(ValueError):
        density_set(c, A, 1.0)


def test_density_sets_shrink_with_epsilon():
    c = DerivedCapacity(tower((2, 3), WeightedP([0.3, 0.7], 2.0), WeightedP.uniform(3)))
    eps = [0.9, 0.5, 0.25, 0.1, 0.01]
    for m in range(64):
        A = PointSet(c.space, m)
        sets = [density_set(c, A, e) for e in eps]
        for big, small in zip(sets, sets[1:]):
            assert small <= big


@pytest.mark.parametrize("arities", [(2, 2), (3, 2), (2, 2, 2)])
def test_tilde_fixes_sets_for_strictly_monotone_towers(arities):
    # finite p with positive weights: f <= g, f != g forces n(f) < n(g)
    for combo, t in all_towers(arities, names=("u1", "u2", "skew3")):
        c = DerivedCapacity(t)
        for m in range(1 << c.space.n_leaves):
            A = PointSet(c.space, m)
            assert tilde_steprans(c, A) == A, combo


def test_tilde_max_level_swallows_cell():
    c = DerivedCapacity(tower((2,), MaxNorm(2)))
    A = PointSet.from_leaves(c.space, [(0,)])
    assert tilde_steprans(c, A) == PointSet.full(c.space)


def test_tilde_report_grid_validation():
    c = DerivedCapacity(uniform_tower((2,)))
    A = PointSet.full(c.space)
    with pytest.raises(ValueError):
        tilde_report(c, A, [0.1, 0.5])
    with pytest.raises(ValueError):
        tilde_report(c, A, [])
    rep = tilde_report(c, A)
    assert rep.stabilized and rep.tilde == A


# -- strong subadditivity --------------------------------------------------------


def test_strong_subadd_measure_holds():
    res = strong_subadd_search(DerivedCapacity(uniform_tower((2, 3))))
    assert res.witness is None and res.exhausted
    assert res.pairs_checked == 64 * 65 // 2


def test_strong_subadd_mixed_tower_fails():
    c = DerivedCapacity(tower((2, 3), MaxNorm(2), WeightedP.uniform(3, 2.0)))
    res = strong_subadd_search(c)
    assert res.witness is not None and res.excess > 0
    A, B = res.witness
    assert c(A | B) + c(A & B) > c(A) + c(B)


def test_strong_subadd_budget():
    res = strong_subadd_search(DerivedCapacity(uniform_tower((2, 2))), max_pairs=10)
    assert res.pairs_checked == 10 and not res.exhausted
