"""Sheared parallelogram families and their areas.

A family of depth ``h`` has one parallelogram per base cell ``t = k / 2**h``
of the y-axis.  Its cross-section at abscissa ``x`` is the half-open interval
``[t + x*s, t + x*s + 2**-h)``.  Offsets and slopes are kept as integer
numerators over ``2**h`` so exact work reduces to integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic_tree import leaf_slope
from .sticky import StickyMap

EXACT_EVENT_BUDGET = 200_000
SAMPLED_STEP = Fraction(1, 1 << 13)  # 2**14 abscissas across x in [0, 2]
EXACT_MAX_DEPTH = 6


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Parallelogram:
    t: Fraction
    width: Fraction
    slope: Fraction

    def corners(self) -> tuple[tuple[Fraction, Fraction], ...]:
        t, w, s = self.t, self.width, self.slope
        return ((Fraction(0), t), (Fraction(0), t + w), (Fraction(2), t + w + 2 * s), (Fraction(2), t + 2 * s))

    def section(self, x: Fraction) -> tuple[Fraction, Fraction]:
        lo = self.t + x * self.slope
        return lo, lo + self.width


@dataclass(frozen=True)
class ParallelogramFamily:
    h: int
    slope_num: tuple[int, ...]
    sigma: StickyMap | None = None

    def __post_init__(self):
        if len(self.slope_num) != 1 << self.h:
            raise ValueError(f"need {1 << self.h} slopes, got {len(self.slope_num)}")
        if any(not 0 <= m < (1 << self.h) for m in self.slope_num):
            raise ValueError("slope numerators must lie in [0, 2**h)")

    def __len__(self) -> int:
        return 1 << self.h

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(1 << self.h, dtype=np.int64)

    @property
    def slopes_array(self) -> np.ndarray:
        return np.asarray(self.slope_num, dtype=np.int64)

    @property
    def width(self) -> Fraction:
        return Fraction(1, 1 << self.h)

    def members(self) -> list[Parallelogram]:
        den = 1 << self.h
        return [Parallelogram(Fraction(k, den), self.width, Fraction(m, den)) for k, m in enumerate(self.slope_num)]

    def slopes(self) -> list[Fraction]:
        den = 1 << self.h
        return [Fraction(m, den) for m in self.slope_num]


def build_family(sigma: StickyMap) -> ParallelogramFamily:
    h = sigma.depth
    nums = []
    for k in range(1 << h):
        t = format(k, f"0{h}b") if h else ""
        nums.append(int(leaf_slope(sigma(t)) * (1 << h)))
    return ParallelogramFamily(h, tuple(nums), sigma)


def family_from_slopes(h: int, slopes: Sequence[Fraction | int]) -> ParallelogramFamily:
    """Family with explicit slopes (fractions with denominator dividing ``2**h``, or numerators)."""
    nums = []
    for s in slopes:
        if isinstance(s, int):
            nums.append(s)
        else:
            v = Fraction(s) * (1 << h)
            if v.denominator != 1:
                raise ValueError(f"slope {s} is not a multiple of 2**-{h}")
            nums.append(int(v))
    return ParallelogramFamily(h, tuple(nums))


# -- cross sections ---------------------------------------------------------------


def _union_units(lefts: np.ndarray, w) -> np.ndarray:
    """Union length of intervals [l, l + w), rows independent."""
    srt = np.sort(lefts, axis=-1)
    gaps = np.diff(srt, axis=-1)
    return w + np.minimum(gaps, w).sum(axis=-1)


def _cross_section_exact_batch(family: ParallelogramFamily, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # at x = p/q the scaled left ends k*q + m*p are integers; width scales to q
    k, m = family.offsets, family.slopes_array
    lefts = k[None, :] * q[:, None] + m[None, :] * p[:, None]
    gaps = np.diff(np.sort(lefts, axis=1), axis=1)
    return q + np.minimum(gaps, q[:, None]).sum(axis=1)


def cross_section(family: ParallelogramFamily, x: Fraction) -> Fraction:
    """Exact measure of the family's slice at abscissa ``x``."""
    x = Fraction(x)
    if not 0 <= x <= 2:
        raise ValueError("x must lie in [0, 2]")
    p, q = x.numerator, x.denominator
    # plain Python integers: exact for any denominator
    lefts = sorted(k * q + m * p for k, m in enumerate(family.slope_num))
    u = q + sum(min(b - a, q) for a, b in zip(lefts, lefts[1:]))
    return Fraction(u, q << family.h)


def cross_section_float(family: ParallelogramFamily, xs: np.ndarray) -> np.ndarray:
    k = family.offsets.astype(float)
    m = family.slopes_array.astype(float)
    lefts = k[None, :] + np.asarray(xs, dtype=float)[:, None] * m[None, :]
    return _union_units(lefts, 1.0) / (1 << family.h)


# -- strips -------------------------------------------------------------------------


def strip_bounds(j: int) -> tuple[Fraction, Fraction]:
    if j < 0:
        raise ValueError("strip index must be nonnegative")
    return Fraction(1, 1 << j), Fraction(2, 1 << j)


@dataclass(frozen=True)
class StripMeasure:
    j: int
    value: Fraction | float
    method: str
    error_bound: float = 0.0
    events: int = 0

    def __float__(self) -> float:
        return float(self.value)


def breakpoints(family: ParallelogramFamily, lo: Fraction, hi: Fraction,
                budget: int = EXACT_EVENT_BUDGET) -> list[Fraction]:
    """Abscissas in ``[lo, hi]`` where two section endpoints meet, plus the ends."""
    k, m = family.offsets, family.slopes_array
    i, j = np.triu_indices(len(k), 1)
    sel = m[i] != m[j]
    i, j = i[sel], j[sel]
    if 3 * len(i) > budget:
        raise BudgetExceeded(f"{3 * len(i)} candidate events exceed budget {budget}")
    den = m[i] - m[j]
    nums = np.concatenate([k[j] - k[i] + d for d in (-1, 0, 1)])
    dens = np.concatenate([den] * 3)
    sign = np.sign(dens)
    nums, dens = nums * sign, dens * sign
    g = np.gcd(nums, dens)
    g[g == 0] = 1
    nums, dens = nums // g, dens // g
    # keep lo <= x <= hi, compared exactly with integer cross-multiplication
    keep = (nums * lo.denominator >= lo.numerator * dens) & (nums * hi.denominator <= hi.numerator * dens)
    pairs = set(zip(nums[keep].tolist(), dens[keep].tolist()))
    pts = {Fraction(a, b) for a, b in pairs}
    pts.update((lo, hi))
    return sorted(pts)


def _strip_exact(family: ParallelogramFamily, j: int, budget: int) -> StripMeasure:
    lo, hi = strip_bounds(j)
    xs = breakpoints(family, lo, hi, budget)
    p = np.array([x.numerator for x in xs], dtype=np.int64)
    q = np.array([x.denominator for x in xs], dtype=np.int64)
    units = _cross_section_exact_batch(family, p, q)
    scale = 1 << family.h
    f = [Fraction(int(u), int(d) * scale) for u, d in zip(units, q)]
    total = Fraction(0)
    for a in range(len(xs) - 1):
        total += (xs[a + 1] - xs[a]) * (f[a] + f[a + 1]) / 2
    return StripMeasure(j, total, "exact", 0.0, len(xs))


def slope_variation(family: ParallelogramFamily) -> float:
    """Sum over unordered pairs of slope differences (in units of 1)."""
    s = np.sort(family.slopes_array.astype(float)) / (1 << family.h)
    n = len(s)
    coef = 2 * np.arange(n) - (n - 1)
    return float((coef * s).sum())


def _strip_sampled(family: ParallelogramFamily, j: int, step: Fraction) -> StripMeasure:
    lo, hi = strip_bounds(j)
    cells = int((hi - lo) / step)
    if cells * step != hi - lo:
        raise ValueError(f"step {step} does not divide strip {j}")
    d = float(step)
    mids = float(lo) + d * (np.arange(cells) + 0.5)
    total = 0.0
    for chunk in np.array_split(mids, max(1, (cells * len(family)) // 4_000_000 + 1)):
        total += float(cross_section_float(family, chunk).sum())
    value = total * d
    # midpoint rule is exact on linear pieces; each endpoint meeting bends the slope by at most |s_i - s_j|
    bound = d * d / 8 * 4 * slope_variation(family)
    return StripMeasure(j, value, "sampled", bound, cells)


def strip_area(family: ParallelogramFamily, j: int, method: str = "auto",
               budget: int = EXACT_EVENT_BUDGET, step: Fraction = SAMPLED_STEP) -> StripMeasure:
    """Area of the family inside the vertical strip ``[2**-j, 2**(1-j)]``."""
    if method == "auto":
        method = "exact" if family.h <= EXACT_MAX_DEPTH else "sampled"
    if method == "exact":
        return _strip_exact(family, j, budget)
    if method == "sampled":
        return _strip_sampled(family, j, step)
    raise ValueError(f"unknown method {method!r}")


def area_exact(family: ParallelogramFamily, lo: Fraction, hi: Fraction) -> Fraction:
    """Exact area over an arbitrary x-range; used to check strip additivity."""
    xs = breakpoints(family, Fraction(lo), Fraction(hi))
    p = np.array([x.numerator for x in xs], dtype=np.int64)
    q = np.array([x.denominator for x in xs], dtype=np.int64)
    units = _cross_section_exact_batch(family, p, q)
    f = [Fraction(int(u), int(d) << family.h) for u, d in zip(units, q)]
    return sum(((xs[a + 1] - xs[a]) * (f[a] + f[a + 1]) / 2 for a in range(len(xs) - 1)), Fraction(0))


# -- pairwise overlaps --------------------------------------------------------------------


def _tent_primitive(u: Fraction) -> Fraction:
    if u <= -1:
        return Fraction(0)
    if u <= 0:
        return (u + 1) ** 2 / 2
    if u <= 1:
        return 1 - (1 - u) ** 2 / 2
    return Fraction(1)


def _pair_differences(family: ParallelogramFamily):
    k, m = family.offsets, family.slopes_array
    a = k[:, None] - k[None, :]
    b = m[:, None] - m[None, :]
    return a, b


def _touching(a: np.ndarray, b: np.ndarray, lo: Fraction, hi: Fraction) -> np.ndarray:
    # does |a + b x| < 1 somewhere on [lo, hi]?  scaled by the common denominator of the ends
    den = lo.denominator * hi.denominator // np.gcd(lo.denominator, hi.denominator)
    x0, x1 = int(lo * den), int(hi * den)
    v0 = a * den + b * x0
    v1 = a * den + b * x1
    vmin, vmax = np.minimum(v0, v1), np.maximum(v0, v1)
    return (vmin < den) & (vmax > -den)


def _tent_primitive_array(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, -1.0, 1.0)
    return np.where(u <= 0, (u + 1) ** 2 / 2, 1 - (1 - u) ** 2 / 2)


def overlap_sum(family: ParallelogramFamily, j: int, exact: bool = True) -> Fraction | float:
    """Sum over ordered pairs (diagonal included) of overlap areas in strip ``j``.

    Pairs are grouped by their offset and slope differences; each group's
    overlap is the integral of a tent function, done in closed form.  With
    ``exact=False`` the same closed form is evaluated in floating point.
    """
    lo, hi = strip_bounds(j)
    a, b = _pair_differences(family)
    hit = _touching(a, b, lo, hi)
    keys = np.stack([a[hit], b[hit]], axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    w = family.width
    if not exact:
        ua, ub = uniq[:, 0].astype(float), uniq[:, 1].astype(float)
        flat = ub == 0
        safe = np.where(flat, 1.0, ub)
        sloped = (_tent_primitive_array(ua + ub * float(hi)) - _tent_primitive_array(ua + ub * float(lo))) / safe
        level = (1 - np.abs(ua)) * float(hi - lo)
        return float(np.sum(counts * np.where(flat, level, sloped)) * float(w))
    total = Fraction(0)
    for (ai, bi), c in zip(uniq.tolist(), counts.tolist()):
        if bi == 0:
            area = (1 - abs(Fraction(ai))) * (hi - lo)
        else:
            area = (_tent_primitive(ai + bi * hi) - _tent_primitive(ai + bi * lo)) / bi
        total += c * area
    return total * w


def intersecting_pairs(family: ParallelogramFamily, j: int) -> np.ndarray:
    """Off-diagonal ordered pairs ``(i, l)`` whose strip-``j`` pieces overlap in positive area."""
    lo, hi = strip_bounds(j)
    a, b = _pair_differences(family)
    hit = _touching(a, b, lo, hi)
    np.fill_diagonal(hit, False)
    return np.argwhere(hit)


def displacement_constant(family: ParallelogramFamily, j: int) -> float | None:
    """Smallest ``2**-j |I_D(t1,t2)| / |t1 - t2|`` over intersecting pairs, or None if none intersect."""
    pairs = intersecting_pairs(family, j)
    if len(pairs) == 0:
        return None
    i, l = pairs[:, 0], pairs[:, 1]
    x = np.bitwise_xor(i, l)
    bl = np.floor(np.log2(x)).astype(int) + 1
    ratio = np.exp2(bl - j) / np.abs(i - l)
    return float(ratio.min())


def overlap_union_bound(family: ParallelogramFamily, j: int, overlap: Fraction | None = None) -> Fraction:
    """Lower bound for the strip area from the overlap sum: equal pieces of size 2**(-h-j)."""
    if overlap is None:
        overlap = overlap_sum(family, j)
    alpha = Fraction(1, 1 << (family.h + j))
    return union_lower_bound(alpha, len(family), overlap)


def union_lower_bound(alpha, K: int, M) -> Fraction:
    """``alpha**2 K**2 / (16 M)``: union size forced by the pairwise intersection total ``M``."""
    if M <= 0:
        raise ValueError("pairwise sum must be positive")
    if alpha <= 0 or K < 1:
        raise ValueError("need alpha > 0 and K >= 1")
    return Fraction(alpha) ** 2 * K * K / (16 * Fraction(M))


# -- gamma counts --------------------------------------------------------------------


def _pair_count(M2: int, d: int) -> int:
    # ordered pairs (t1, t2) below w, on opposite sides, at distance d (units 2**-h); M2 = 2**(h-h(w))
    half = M2 // 2
    if d < 1 or d > M2 - 1:
        return 0
    return 2 * (half - abs(d - half))


def gamma_counts(w: str, j: int, l: int | None, h: int) -> int:
    """Cardinality of the pair sets attached to ``w``.

    With ``l=None`` counts pairs with common ancestor ``w`` and
    ``2**j |t1 - t2| <= |I_w|`` (the diagonal pair counts when ``w`` is a
    leaf).  With an integer ``l`` counts the dyadic band
    ``|I_w| / 2 < 2**(j+l) |t1 - t2| <= |I_w|``.
    """
    hw = len(w)
    if hw > h:
        raise ValueError("vertex below working depth")
    if hw == h:
        return 1 if l is None else 0
    M2 = 1 << (h - hw)
    e = h - hw - j - (0 if l is None else l)
    if e < 0:
        return 0
    top = min(1 << e, M2 - 1)
    bottom = 0 if l is None else (1 << e) // 2
    return sum(_pair_count(M2, d) for d in range(bottom + 1, top + 1))


def subtree_count_sides(w: str, l_star: int, j: int, h: int) -> tuple[int, int]:
    """Left side and (doubled) right side of the subtree counting inequality."""
    hw = len(w)
    lhs = 0
    for l in range(l_star):
        if hw + l > h:
            break
        lhs += (1 << l) * gamma_counts("0" * (hw + l), j, l_star - l, h)
    rhs = 0
    if hw + l_star <= h:
        rhs = 2 * (1 << l_star) * gamma_counts("0" * (hw + l_star), j, None, h)
    return lhs, rhs


# -- rendering ---------------------------------------------------------------------------


def render_svg(family: ParallelogramFamily, strips: int = 3, scale: int = 200) -> str:
    """Deterministic SVG of the family; each path carries its exact base and slope."""
    if family.h > 8:
        raise ValueError("rendering supports h <= 8; use a smaller target depth")
    W, H = 2 * scale, 3 * scale

    def px(x: Fraction, y: Fraction) -> str:
        return f"{float(x) * scale:.4f},{H - float(y) * scale:.4f}"

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<!-- h={family.h} slopes={",".join(str(m) for m in family.slope_num)} -->',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
    ]
    for j in range(strips + 1):
        lo, _ = strip_bounds(j)
        x = float(lo) * scale
        lines.append(f'<line class="strip" x1="{x:.4f}" y1="0" x2="{x:.4f}" y2="{H}" stroke="#999" '
                     f'stroke-dasharray="4,4" data-j="{j}"/>')
    for p in family.members():
        pts = " ".join(px(x, y) for x, y in p.corners())
        lines.append(f'<polygon class="par" points="{pts}" fill="#3366cc" fill-opacity="0.25" '
                     f'stroke="#1a3366" stroke-width="0.3" data-t="{p.t}" data-slope="{p.slope}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
