import random
import re
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dirkakeya.dyadic_tree import common_ancestor, full_tree, single_ray
from dirkakeya.geometry import (
    BudgetExceeded,
    area_exact,
    build_family,
    cross_section,
    displacement_constant,
    family_from_slopes,
    gamma_counts,
    overlap_sum,
    overlap_union_bound,
    render_svg,
    strip_area,
    strip_bounds,
    subtree_count_sides,
    union_lower_bound,
)
from dirkakeya.structure import prune
from dirkakeya.sticky import StickyMap, sample_sticky

from oracles import union_length

F = Fraction


def families(max_h=4):
    return st.integers(0, max_h).flatmap(
        lambda h: st.lists(st.integers(0, (1 << h) - 1), min_size=1 << h, max_size=1 << h).map(
            lambda ms: family_from_slopes(h, ms)))


def sampled_family(n, seed):
    return build_family(sample_sticky(prune(full_tree(n)), seed))


def section_oracle(fam, x):
    w = F(1, 1 << fam.h)
    return union_length([(p.t + x * p.slope, p.t + x * p.slope + w) for p in fam.members()])


def area_oracle(fam, lo, hi):
    """Trapezoids between every candidate breakpoint, with union lengths from the interval oracle."""
    ps = fam.members()
    w = F(1, 1 << fam.h)
    xs = {lo, hi}
    for a in ps:
        for b in ps:
            if a.slope != b.slope:
                for d in (-w, 0, w):
                    x = (b.t - a.t + d) / (a.slope - b.slope)
                    if lo < x < hi:
                        xs.add(x)
    xs = sorted(xs)
    f = [section_oracle(fam, x) for x in xs]
    return sum(((xs[i + 1] - xs[i]) * (f[i] + f[i + 1]) / 2 for i in range(len(xs) - 1)), F(0))


def _tent_integral(a, b, lo, hi):
    # integral over [lo, hi] of max(0, 1 - |a + b x|), exact via kinks
    xs = {lo, hi}
    if b:
        xs |= {F(c - a, b) for c in (-1, 0, 1) if lo < F(c - a, b) < hi}
    xs = sorted(xs)
    g = [max(F(0), 1 - abs(a + b * x)) for x in xs]
    return sum(((xs[i + 1] - xs[i]) * (g[i] + g[i + 1]) / 2 for i in range(len(xs) - 1)), F(0))


def overlap_oracle(fam, j):
    lo, hi = strip_bounds(j)
    n = len(fam)
    total = F(0)
    for i in range(n):
        for k in range(n):
            total += _tent_integral(i - k, fam.slope_num[i] - fam.slope_num[k], lo, hi)
    return total / n


def test_single_ray_family_is_sheared_slab():
    sigma = sample_sticky(prune(single_ray("00")), 3)
    fam = build_family(sigma)
    assert len(fam) == 4 and all(s == 0 for s in fam.slopes())
    assert all(cross_section(fam, F(k, 7)) == 1 for k in range(15))


def test_identity_map_slopes():
    target = prune(full_tree(1))
    sigma = StickyMap(target, 1, {"": "", "0": "0", "1": "1"})
    assert build_family(sigma).slopes() == [F(0), F(1, 2)]


def test_slopes_follow_leaf_images():
    sigma = sample_sticky(prune(full_tree(2)), 17)
    fam = build_family(sigma)
    images = sigma.to_dict()["leaf_images"]
    for k, s in enumerate(fam.slopes()):
        assert s == F(int(images[format(k, "02b")], 2), 4)


def test_cross_section_examples():
    fam = family_from_slopes(1, [F(0), F(1, 2)])
    assert cross_section(fam, F(0)) == 1
    assert cross_section(fam, F(1)) == 1
    assert cross_section(family_from_slopes(2, [3, 3, 3, 3]), F(5, 3)) == 1
    with pytest.raises(ValueError):
        cross_section(fam, F(3))


@given(families(), st.fractions(0, 2))
def test_cross_section_matches_interval_oracle(fam, x):
    assert cross_section(fam, x) == section_oracle(fam, x)


def test_strip_area_examples():
    assert strip_area(family_from_slopes(1, [F(0), F(1, 2)]), 0).value == 1
    par = family_from_slopes(3, [5] * 8)
    for j in range(4):
        assert strip_area(par, j, "exact").value == F(1, 1 << j)


@given(families(3), st.integers(0, 3))
def test_exact_strip_area_matches_oracle(fam, j):
    lo, hi = strip_bounds(j)
    m = strip_area(fam, j, "exact")
    assert m.value == area_oracle(fam, lo, hi)
    assert 0 <= m.value <= 3 * (hi - lo)


@given(families(4), st.integers(0, 3))
def test_sampled_within_reported_bound(fam, j):
    e = strip_area(fam, j, "exact")
    s = strip_area(fam, j, "sampled")
    assert abs(float(e.value) - s.value) <= s.error_bound + 1e-12


def test_strips_add_up_to_whole_area():
    fam = sampled_family(4, 9)
    total = sum(strip_area(fam, j, "exact").value for j in range(8)) + area_exact(fam, F(0), F(1, 1 << 7))
    assert total == area_exact(fam, F(0), F(2))


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        strip_area(sampled_family(6, 1), 0, "exact", budget=100)


def test_overlap_examples():
    assert overlap_sum(family_from_slopes(0, [0]), 2) == F(1, 4)
    assert overlap_sum(family_from_slopes(1, [1, 1]), 0) == 1


def test_overlap_against_raster_oracle():
    fam = family_from_slopes(1, [F(0), F(1, 2)])
    lo, hi = strip_bounds(1)
    n = 1 << 12
    xs = float(lo) + (np.arange(n) + 0.5) * float(hi - lo) / n
    w = 0.5
    lefts = np.array([[p.t + 0 for p in fam.members()]], dtype=float) + xs[:, None] * np.array(
        [float(p.slope) for p in fam.members()])
    d = np.abs(lefts[:, :, None] - lefts[:, None, :])
    approx = np.maximum(0, w - d).sum(axis=(1, 2)).mean() * float(hi - lo)
    assert abs(float(overlap_sum(fam, 1)) - approx) < 1e-6


@given(families(3), st.integers(0, 3))
def test_overlap_matches_pairwise_oracle(fam, j):
    exact = overlap_sum(fam, j)
    assert exact == overlap_oracle(fam, j)
    assert abs(overlap_sum(fam, j, exact=False) - float(exact)) < 1e-9
    # diagonal term
    assert exact >= F(1, 1 << j)


@pytest.mark.parametrize("n,seed", [(3, 0), (4, 1), (5, 2), (6, 3)])
def test_union_bound_holds_in_every_strip(n, seed):
    fam = sampled_family(n, seed)
    for j in range(n.bit_length()):
        assert strip_area(fam, j, "exact").value >= overlap_union_bound(fam, j)


@pytest.mark.parametrize("n,seed", [(3, 0), (4, 5), (6, 7), (7, 2)])
def test_displacement_constant(n, seed):
    fam = sampled_family(n, seed)
    for j in range(n.bit_length()):
        c = displacement_constant(fam, j)
        # intersecting pieces force |t1 - t2| <= (2**(1-j) + 1/2) |I_D|
        assert c is None or c >= F(2, 4 + (1 << j))


def gamma_oracle(w, j, l, h):
    count = 0
    size = F(1, 1 << len(w))
    for a in range(1 << h):
        for b in range(1 << h):
            t1, t2 = format(a, f"0{h}b"), format(b, f"0{h}b")
            if t1 == t2:
                if t1 != w:
                    continue
            elif common_ancestor(t1, t2) != w:
                continue
            gap = F(abs(a - b), 1 << h)
            if l is None:
                count += (1 << j) * gap <= size
            else:
                count += size / 2 < (1 << (j + l)) * gap <= size
    return count


def test_gamma_counts_match_enumeration():
    for h in range(1, 5):
        for hw in range(h + 1):
            w = "0" * hw
            for j in range(5):
                assert gamma_counts(w, j, None, h) == gamma_oracle(w, j, None, h)
                for l in range(5):
                    assert gamma_counts(w, j, l, h) == gamma_oracle(w, j, l, h)
                assert gamma_counts("1" * hw, j, 1, h) == gamma_oracle("1" * hw, j, 1, h)


def test_gamma_counts_empty_for_large_j():
    assert gamma_counts("", 6, None, 4) == 0
    assert gamma_counts("", 6, 0, 4) == 0


def test_gamma_counts_order_of_magnitude():
    h = 10
    for hw in range(0, 6):
        for j in range(0, 3):
            for l in range(0, 3):
                e = h - hw - j - l
                if e >= 2:
                    ratio = gamma_counts("0" * hw, j, l, h) / 4 ** (h - l - j - hw)
                    assert 1 / 16 <= ratio <= 2


def test_subtree_counting_inequality_exhaustive():
    for h in range(5):
        for hw in range(h + 1):
            for l_star in range(h + 2):
                for j in range(h + 2):
                    lhs, rhs = subtree_count_sides("0" * hw, l_star, j, h)
                    assert lhs <= rhs


def test_union_lower_bound_examples():
    a = F(1, 3)
    assert union_lower_bound(a, 5, 25 * a) == a / 16
    assert union_lower_bound(a, 5, 5 * a) == 5 * a / 16
    with pytest.raises(ValueError):
        union_lower_bound(a, 5, 0)


@given(st.lists(st.tuples(st.fractions(0, 1, max_denominator=64), st.fractions(F(1, 64), F(1, 2), max_denominator=64)),
                min_size=1, max_size=32))
def test_union_lower_bound_on_interval_families(items):
    ivs = [(a, a + L) for a, L in items]
    alpha = min(L for _, L in items)
    M = sum(max(F(0), min(b1, b2) - max(a1, a2)) for a1, b1 in ivs for a2, b2 in ivs)
    assert union_length(ivs) >= union_lower_bound(alpha, len(ivs), M)


def test_render_is_deterministic_and_parses_back():
    sigma = sample_sticky(prune(full_tree(3)), 7)
    fam = build_family(sigma)
    svg = render_svg(fam)
    assert svg == render_svg(build_family(sample_sticky(prune(full_tree(3)), 7)))
    slopes = [F(s) for s in re.findall(r'data-slope="([^"]+)"', svg)]
    images = sigma.leaf_images()
    assert slopes == [F(int(images[format(k, "03b")], 2), 8) for k in range(8)]
    assert svg.count("<polygon") == 8


def test_render_rejects_deep_families():
    with pytest.raises(ValueError):
        render_svg(family_from_slopes(9, [0] * 512))
