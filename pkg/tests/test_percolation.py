import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dirkakeya.dyadic_tree import cantor_pattern, full_tree, lacunary_chain, single_ray
from dirkakeya.percolation import (
    PercTree,
    complete_tree,
    cover_bruteforce,
    cover_probability,
    lyons_check,
    possible_set,
    ray_tree,
    resistance,
    survival_bruteforce,
    survival_exact,
    survival_mc,
)
from dirkakeya.structure import prune

from oracles import random_perc_tree

F = Fraction


def perc_trees(max_n=5, max_edges=12):
    return st.tuples(st.integers(0, max_n), st.integers(0, 2**32), st.floats(0.3, 0.95)).map(
        lambda a: random_perc_tree(a[0], random.Random(a[1]), a[2], max_edges))


def test_small_exact_values():
    assert resistance(complete_tree(1)) == 1
    assert survival_exact(complete_tree(1)) == F(3, 4)
    assert survival_exact(complete_tree(2)) == F(39, 64)
    assert survival_bruteforce(complete_tree(2)) == F(39, 64)


@pytest.mark.parametrize("n", range(0, 9))
def test_ray_values(n):
    t = ray_tree(n)
    assert survival_exact(t) == F(1, 1 << n)
    assert resistance(t) == (1 << (n + 1)) - 2


def test_complete_tree_recursions():
    p = F(1)
    for n in range(0, 17):
        t = complete_tree(n)
        assert resistance(t) == n
        assert survival_exact(t) == p
        p = p - p * p / 4


def test_dead_tree():
    t = PercTree.from_vertices(["", "0"], 3)
    assert survival_exact(t) == 0
    assert resistance(t) == math.inf
    assert lyons_check(t).passed


@given(perc_trees())
def test_exact_matches_enumeration(t):
    assert survival_exact(t) == survival_bruteforce(t)


@given(perc_trees(8, None))
def test_lyons_bound_holds(t):
    assert lyons_check(t).passed


@given(perc_trees(6, 40), st.integers(0, 2**32))
def test_adding_edges_is_monotone(t, salt):
    rng = random.Random(salt)
    depth = max(len(v) for v in t.children)
    n = max(depth, 1)
    v = rng.choice(sorted(t.children))
    if len(v) >= n:
        return
    grown = set(t.children) | {v + rng.choice("01")}
    bigger = PercTree.from_vertices(grown, n)
    smaller = PercTree.from_vertices(t.children, n)
    assert survival_exact(bigger) >= survival_exact(smaller)
    rb, rs = resistance(bigger), resistance(smaller)
    assert rb <= rs


def test_mc_agrees_and_is_reproducible():
    t = complete_tree(1)
    est = survival_mc(t, 100_000, seed=3)
    assert abs(est.estimate - 0.75) <= 4 * est.stderr
    assert est == survival_mc(t, 100_000, seed=3)
    t6 = complete_tree(6)
    est6 = survival_mc(t6, 50_000, seed=4)
    assert abs(est6.estimate - float(survival_exact(t6))) <= 4 * est6.stderr


def test_lyons_examples():
    r = lyons_check(complete_tree(2))
    assert r.p == F(39, 64) and r.bound == 3 and r.passed
    r = lyons_check(ray_tree(5))
    assert r.p == F(1, 32) and r.bound == F(3, 16) and r.passed


def test_possible_set_example():
    ct = possible_set(1, prune(full_tree(1)), F(3, 2), F(1, 2))
    assert ct.required == {"0": "0", "1": "0"}


def test_possible_set_empty_above_range():
    ct = possible_set(2, prune(full_tree(2)), F(3, 2), F(7, 2))
    assert ct.required == {} and cover_probability((F(3, 2), F(7, 2)), prune(full_tree(2))) == 0


def test_x_at_most_one_rejected():
    with pytest.raises(ValueError):
        possible_set(2, prune(full_tree(2)), F(1), F(1))


def test_single_ray_target_is_deterministic():
    target = prune(single_ray("0110"))
    for y in [F(k, 16) for k in range(0, 48, 5)]:
        x = F(3, 2)
        p = cover_probability((x, y), target)
        slope = F(6, 16)
        inside = any(F(k, 16) + x * slope <= y <= F(k + 1, 16) + x * slope for k in range(16))
        assert p == (1 if inside else 0)
        assert not possible_set(4, target, x, y).choosing


def test_cover_exact_vs_mc_example():
    target = prune(full_tree(2))
    pt = (F(5, 4), F(9, 8))
    exact = cover_probability(pt, target)
    mc = cover_probability(pt, target, "mc", trials=100_000, seed=2)
    assert 0 < exact < 1
    assert abs(mc.estimate - float(exact)) <= 4 * mc.stderr


TARGETS = [full_tree(2), full_tree(3), cantor_pattern(4, "branch,keep-left"), lacunary_chain(3, 1),
           lacunary_chain(3, 2)]


@given(st.sampled_from(range(len(TARGETS))), st.fractions(F(33, 32), 2, max_denominator=32),
       st.fractions(0, 3, max_denominator=32))
def test_cover_exact_matches_enumeration(ti, x, y):
    if x <= 1:
        return
    target = prune(TARGETS[ti])
    assert cover_probability((x, y), target) == cover_bruteforce((x, y), target)


@given(st.sampled_from(range(len(TARGETS))), st.fractions(F(33, 32), 2, max_denominator=32),
       st.fractions(0, 3, max_denominator=32))
def test_choosing_tree_survival_matches_when_conflict_free(ti, x, y):
    if x <= 1:
        return
    target = prune(TARGETS[ti])
    ct = possible_set(target.height, target, x, y)
    exact = cover_probability((x, y), target)
    if ct.tree is not None:
        assert survival_exact(ct.tree) == exact
        assert ct.tree.height() <= target.height
    elif ct.required:
        assert ct.conflict


def test_conflicts_occur():
    target = prune(full_tree(3))
    found = False
    for a in range(33, 65):
        for b in range(0, 96):
            ct = possible_set(3, target, F(a, 32), F(b, 32))
            if ct.conflict:
                found = True
                break
        if found:
            break
    assert found


def test_cover_probability_decreases_with_split():
    worst = []
    for n in (2, 4, 6):
        target = prune(full_tree(n))
        pts = [(F(a, 16), F(b, 16)) for a in (17, 20, 24, 28, 32) for b in range(4, 40, 3)]
        worst.append(max(cover_probability(p, target) for p in pts))
    assert worst[0] > worst[1] > worst[2]
