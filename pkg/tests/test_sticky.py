import random
from collections import Counter
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dirkakeya.dyadic_tree import cantor_pattern, common_ancestor, full_tree, lacunary_chain, single_ray
from dirkakeya.structure import prune
from dirkakeya.sticky import (
    ChildTable,
    StickyMap,
    edge_bits,
    heap_index,
    is_sticky,
    mass_identity,
    propagate_images,
    sample_leaf_images,
    sample_sticky,
)

from oracles import random_tree


def all_bit_maps(target, h):
    """Every sticky map reachable from some edge-bit vector, with its multiplicity."""
    cols = [heap_index(format(k, f"0{lv}b")) for lv in range(1, h + 1) for k in range(1 << lv)]
    n = 1 << len(cols)
    bits = np.zeros((n, max(4, 1 << (h + 1))), dtype=np.uint8)
    for i, c in enumerate(cols):
        bits[:, c] = (np.arange(n) >> i) & 1
    levels = propagate_images(ChildTable.from_tree(target.tree, h), bits)
    maps = []
    for row in range(n):
        maps.append({(format(k, f"0{lv}b") if lv else ""): (format(int(v), f"0{lv}b") if lv else "")
                     for lv, arr in enumerate(levels) for k, v in enumerate(arr[row])})
    return maps


def test_single_ray_target_forces_the_map():
    target = prune(single_ray("0110"))
    for seed in range(5):
        s = sample_sticky(target, seed)
        assert all(v == "0110"[:len(u)] for u, v in s.assignment.items())


def test_full_tree_census_matches_bit_enumeration():
    target = prune(full_tree(2))
    exact = Counter(tuple(sorted((u, v) for u, v in m.items() if len(u) == 2)) for m in all_bit_maps(target, 2))
    n = 40_000
    imgs = sample_leaf_images(target, seed=11, n=n)
    sampled = Counter(tuple((format(k, "02b"), format(int(v), "02b")) for k, v in enumerate(row)) for row in imgs)
    assert set(sampled) <= set(exact)
    for key, mult in exact.items():
        p = mult / 64
        sd = (p * (1 - p) / n) ** 0.5
        assert abs(sampled[key] / n - p) <= 5 * sd
    identity = tuple((u, u) for u in ["00", "01", "10", "11"])
    assert exact[identity] == 1


def test_trial_addressing_matches_batch_rows():
    target = prune(cantor_pattern(6, "branch,keep-left"))
    batch = sample_leaf_images(target, seed=5, n=12)
    for i in range(12):
        s = sample_sticky(target, 5, trial=i)
        assert [int(s(format(k, f"0{s.depth}b")), 2) for k in range(1 << s.depth)] == list(batch[i])


def test_edge_bits_reproducible_and_fair():
    a = edge_bits(123, 5, 200)
    assert np.array_equal(a, edge_bits(123, 5, 200))
    assert not np.array_equal(a, edge_bits(124, 5, 200))
    assert abs(a.mean() - 0.5) < 0.02


def test_is_sticky_examples():
    full = prune(full_tree(2))
    identity = {u: u for u in full.tree.vertices}
    assert is_sticky(identity, full)
    swapped = {"": "", "0": "1", "1": "0", "00": "10", "01": "11", "10": "00", "11": "01"}
    assert is_sticky(swapped, full)
    broken = dict(identity, **{"0": "0", "01": "10"})
    assert not is_sticky(broken, full)


def test_is_sticky_rejects_height_change_and_missing_root():
    full = prune(full_tree(2))
    identity = {u: u for u in full.tree.vertices}
    assert not is_sticky(dict(identity, **{"0": "00"}), full)
    assert not is_sticky(dict(identity, **{"": "0"}), full)


def test_mass_identity_single_ray():
    s = sample_sticky(prune(single_ray("000")), 1)
    assert mass_identity(s) == [1]


def test_mass_identity_all_maps_depth_two():
    target = prune(full_tree(2))
    for m in all_bit_maps(target, 2):
        assert mass_identity(StickyMap(target, 2, m)) == [1, 1, 1]


def test_json_round_trip():
    target = prune(full_tree(3))
    s = sample_sticky(target, 42)
    data = s.to_dict()
    back = StickyMap.from_leaf_images(target, data["leaf_images"], data["seed"])
    assert back.assignment == s.assignment


def test_from_leaf_images_rejects_inconsistent():
    target = prune(full_tree(2))
    with pytest.raises(ValueError):
        StickyMap.from_leaf_images(target, {"00": "00", "01": "10", "10": "10", "11": "11"})


@pytest.mark.parametrize("h", [1, 2, 3])
def test_leaf_marginal_uniform_for_full_target(h):
    target = prune(full_tree(h))
    maps = all_bit_maps(target, h) if h < 3 else None
    leaf = "1" * h
    if maps is not None:
        counts = Counter(m[leaf] for m in maps)
        assert len(counts) == 1 << h and len(set(counts.values())) == 1
    n = 20_000
    imgs = sample_leaf_images(target, seed=h, n=n)[:, (1 << h) - 1]
    freq = np.bincount(imgs, minlength=1 << h) / n
    p = 1 / (1 << h)
    assert np.all(np.abs(freq - p) <= 5 * (p * (1 - p) / n) ** 0.5)


def targets():
    return st.tuples(st.integers(1, 7), st.integers(0, 2**32)).map(
        lambda a: prune(random_tree(a[0], random.Random(a[1]))))


@given(targets(), st.integers(0, 2**63))
def test_samples_are_sticky_with_unit_mass(target, seed):
    s = sample_sticky(target, seed)
    assert is_sticky(s.assignment, target, s.depth)
    assert all(x == 1 for x in mass_identity(s))


@given(targets(), st.integers(0, 2**63))
def test_images_agree_above_common_ancestor(target, seed):
    s = sample_sticky(target, seed)
    h = s.depth
    rng = random.Random(seed)
    for _ in range(10):
        t1 = "".join(rng.choice("01") for _ in range(h))
        t2 = "".join(rng.choice("01") for _ in range(h))
        d = s(common_ancestor(t1, t2))
        assert s(t1).startswith(d) and s(t2).startswith(d)


def test_lacunary_target_mass():
    for seed in range(20):
        s = sample_sticky(prune(lacunary_chain(8, 2)), seed)
        assert mass_identity(s) == [Fraction(1)] * len(s.target.generations)
