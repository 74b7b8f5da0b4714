"""Bernoulli edge percolation on finite trees and the point-coverage bridge.

Nodes of a :class:`PercTree` are bit strings.  Every edge is open with its
own probability (one half unless stated otherwise); a tree survives when an
open path joins the root to a terminal node.  Exact quantities are
:class:`~fractions.Fraction` values, with structurally identical subtrees
computed once so that the complete tree of height 16 stays cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .dyadic_tree import ROOT, check_vertex
from .sticky import ChildTable, edge_bits, heap_index, propagate_paths
from .structure import PrunedTree

HALF = Fraction(1, 2)
INF = math.inf


@dataclass(frozen=True)
class PercTree:
    """Rooted tree with terminal nodes and per-edge survival probabilities.

    ``edge_prob`` is keyed by child node; missing entries mean one half.
    """

    children: Mapping[str, tuple[str, ...]]
    terminals: frozenset[str]
    root: str = ROOT
    edge_prob: Mapping[str, Fraction] = field(default_factory=dict)

    @classmethod
    def from_vertices(cls, vertices: Iterable[str], depth: int) -> "PercTree":
        """Subtree of the complete binary tree of height ``depth`` spanned by a prefix-closed set."""
        verts = {check_vertex(v) for v in vertices}
        if ROOT not in verts:
            raise ValueError("vertex set must contain the root")
        kids: dict[str, tuple[str, ...]] = {}
        for v in verts:
            if v and v[:-1] not in verts:
                raise ValueError(f"vertex set is not prefix closed at {v!r}")
            if len(v) > depth:
                raise ValueError(f"vertex {v!r} deeper than {depth}")
            kids[v] = tuple(c for c in (v + "0", v + "1") if c in verts)
        terminals = frozenset(v for v in verts if len(v) == depth)
        return cls(kids, terminals)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.children, key=lambda v: (len(v), v))

    def edges(self) -> list[str]:
        """Edges named by their lower endpoint."""
        return [c for v in self.nodes for c in self.children[v]]

    def prob(self, child: str) -> Fraction:
        return Fraction(self.edge_prob.get(child, HALF))

    def height(self) -> int:
        def walk(v: str) -> int:
            return 1 + max((walk(c) for c in self.children[v]), default=-1)
        return walk(self.root)

    def uniform(self) -> bool:
        return all(self.prob(c) == HALF for c in self.edges())

    def without(self, node: str) -> "PercTree":
        """Drop ``node`` and everything below it."""
        if node == self.root:
            raise ValueError("cannot drop the root")
        gone = {v for v in self.children if v.startswith(node)}
        kids = {v: tuple(c for c in cs if c not in gone) for v, cs in self.children.items() if v not in gone}
        return PercTree(kids, self.terminals - gone, self.root,
                        {k: p for k, p in self.edge_prob.items() if k not in gone})


def complete_tree(n: int) -> PercTree:
    verts = [format(k, f"0{h}b") if h else "" for h in range(n + 1) for k in range(1 << h)]
    return PercTree.from_vertices(verts, n)


def ray_tree(n: int, bits: str | None = None) -> PercTree:
    bits = "0" * n if bits is None else bits
    return PercTree.from_vertices([bits[:k] for k in range(n + 1)], n)


def _fold(tree: PercTree, leaf, dead, combine):
    # bottom-up fold with structural sharing: identical shapes are evaluated once
    shape_ids: dict[tuple, int] = {}
    values: list = []
    node_shape: dict[str, int] = {}
    for v in sorted(tree.children, key=len, reverse=True):
        if v in tree.terminals:
            key: tuple = ("T",)
        else:
            key = tuple(sorted((str(tree.prob(c)), node_shape[c]) for c in tree.children[v]))
        sid = shape_ids.get(key)
        if sid is None:
            sid = len(values)
            shape_ids[key] = sid
            if v in tree.terminals:
                values.append(leaf)
            elif not tree.children[v]:
                values.append(dead)
            else:
                values.append(combine([(tree.prob(c), values[node_shape[c]]) for c in tree.children[v]]))
        node_shape[v] = sid
    return values[node_shape[tree.root]]


def survival_exact(tree: PercTree) -> Fraction:
    """Probability that an open path joins the root to a terminal node."""
    def combine(items):
        miss = Fraction(1)
        for q, p in items:
            miss *= 1 - q * p
        return 1 - miss
    return _fold(tree, Fraction(1), Fraction(0), combine)


def resistance(tree: PercTree) -> Fraction | float:
    """Effective resistance with the series/parallel law ``1/R = sum 1/(2 + 2 R_child)``.

    Returns ``math.inf`` when no terminal is reachable.
    """
    if not tree.uniform():
        raise ValueError("resistance is defined for trees with all edge probabilities one half")

    def combine(items):
        conductance = Fraction(0)
        for _, r in items:
            if r != INF:
                conductance += 1 / (2 + 2 * r)
        return INF if conductance == 0 else 1 / conductance
    return _fold(tree, Fraction(0), INF, combine)


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    trials: int
    seed: int
    hits: int


def _index(tree: PercTree):
    nodes = tree.nodes
    pos = {v: i for i, v in enumerate(nodes)}
    edges = tree.edges()
    probs = np.array([float(tree.prob(c)) for c in edges])
    return nodes, pos, edges, probs


def survival_mc(tree: PercTree, trials: int, seed: int, chunk: int = 20_000) -> MCEstimate:
    """Frequency of survival over independent percolation samples."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    nodes, pos, edges, probs = _index(tree)
    edge_pos = {c: i for i, c in enumerate(edges)}
    order = sorted(nodes, key=len, reverse=True)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        open_ = rng.random((n, len(edges))) < probs
        alive: dict[str, np.ndarray] = {}
        for v in order:
            if v in tree.terminals:
                alive[v] = np.ones(n, dtype=bool)
                continue
            acc = np.zeros(n, dtype=bool)
            for c in tree.children[v]:
                acc |= open_[:, edge_pos[c]] & alive[c]
            alive[v] = acc
        hits += int(alive[tree.root].sum())
        done += n
    p = hits / trials
    return MCEstimate(p, math.sqrt(p * (1 - p) / trials), trials, seed, hits)


def survival_bruteforce(tree: PercTree) -> Fraction:
    """Enumerate every edge configuration; only for small trees."""
    edges = tree.edges()
    if len(edges) > 20:
        raise ValueError("too many edges to enumerate")
    pos = {c: i for i, c in enumerate(edges)}
    order = sorted(tree.children, key=len, reverse=True)
    total = Fraction(0)
    for mask in range(1 << len(edges)):
        weight = Fraction(1)
        for c, i in pos.items():
            q = tree.prob(c)
            weight *= q if mask >> i & 1 else 1 - q
        if weight == 0:
            continue
        alive: dict[str, bool] = {}
        for v in order:
            alive[v] = v in tree.terminals or any(mask >> pos[c] & 1 and alive[c] for c in tree.children[v])
        if alive[tree.root]:
            total += weight
    return total


@dataclass(frozen=True)
class LyonsResult:
    p: Fraction
    R: Fraction | float
    bound: Fraction
    passed: bool
    ratio: float  # p * (2 + R): the best constant this tree would allow


def lyons_check(tree: PercTree) -> LyonsResult:
    p = survival_exact(tree)
    R = resistance(tree)
    if R == INF:
        return LyonsResult(p, R, Fraction(0), p == 0, 0.0)
    bound = Fraction(12) / (2 + R)
    return LyonsResult(p, R, bound, p <= bound, float(p * (2 + R)))


# -- point coverage ------------------------------------------------------------------


@dataclass(frozen=True)
class ChoosingTree:
    """Which base leaves could cover a point, and the random decisions that matter.

    ``required`` maps each possible base leaf to the one target leaf its
    image must equal.  ``tree`` is the percolation tree on the span of the
    possible leaves: edges leaving a vertex whose required image splits are
    open with probability one half, the others are always open.  It is
    ``None`` when two possible leaves demand different images of a shared
    ancestor (``conflict``), in which case coverage is not a plain
    percolation event.
    """

    x: Fraction
    y: Fraction
    h: int
    required: Mapping[str, str]
    tree: PercTree | None
    conflict: bool
    choosing: frozenset[str]

    @property
    def possible(self) -> list[str]:
        return sorted(self.required)

    def choosing_depth(self) -> int:
        """Most choosing vertices met on one root-to-leaf path."""
        return max((sum(t[:k] in self.choosing for k in range(self.h)) for t in self.required), default=0)


def _check_point(x, y) -> tuple[Fraction, Fraction]:
    x, y = Fraction(x), Fraction(y)
    if not 1 < x <= 2:
        raise ValueError("x must lie in (1, 2]")
    return x, y


def possible_set(h: int, target: PrunedTree, x, y) -> ChoosingTree:
    """Possible base leaves for the point ``(x, y)`` and its choosing tree.

    The parallelogram over base ``t`` with slope ``s`` contains the point when
    ``t + x s <= y <= t + x s + 2**-h``; for ``x > 1`` at most one slope on
    the ``2**-h`` grid qualifies.
    """
    x, y = _check_point(x, y)
    tree = target.tree
    if not 0 <= h <= tree.depth:
        raise ValueError(f"depth {h} outside target depth {tree.depth}")
    den = 1 << h
    leaves = set(tree.level(h))
    required: dict[str, str] = {}
    for k in range(den):
        lo = (y - Fraction(k + 1, den)) / x * den
        hi = (y - Fraction(k, den)) / x * den
        m = math.floor(hi)
        if m < lo or not 0 <= m < den:
            continue
        s = format(m, f"0{h}b") if h else ""
        if s in leaves:
            required[format(k, f"0{h}b") if h else ""] = s
    span = {t[:k] for t in required for k in range(h + 1)}
    image: dict[str, str] = {}
    conflict = False
    for t, s in required.items():
        for k in range(h + 1):
            if image.setdefault(t[:k], s[:k]) != s[:k]:
                conflict = True
    choosing = frozenset(u for u in span if len(u) < h and u in image and tree.is_splitting(image[u]))
    perc = None
    if required and not conflict:
        probs = {c: (HALF if c[:-1] in choosing else Fraction(1)) for c in span if c}
        perc = PercTree.from_vertices(span, h)
        perc = PercTree(perc.children, perc.terminals, ROOT, probs)
    return ChoosingTree(x, y, h, required, perc, conflict, choosing)


def _cover_exact(ct: ChoosingTree, target: PrunedTree) -> Fraction:
    tree = target.tree
    span = {t[:k] for t in ct.required for k in range(ct.h + 1)}
    wanted = {t[:k] + "|" + s[:k] for t, s in ct.required.items() for k in range(ct.h + 1)}

    @lru_cache(maxsize=None)
    def q(u: str, v: str) -> Fraction:
        # probability some possible leaf below base vertex u lands on its required image, given sigma(u) = v
        if u + "|" + v not in wanted:
            return Fraction(0)
        if len(u) == ct.h:
            return Fraction(1)
        kids = tree.children(v)
        miss = Fraction(1)
        for c in (u + "0", u + "1"):
            if c not in span:
                continue
            if len(kids) == 2:
                e = (q(c, kids[0]) + q(c, kids[1])) / 2
            else:
                e = q(c, kids[0])
            miss *= 1 - e
        return 1 - miss

    return q(ROOT, ROOT)


def _cover_mc(ct: ChoosingTree, target: PrunedTree, trials: int, seed: int, chunk: int) -> MCEstimate:
    h = ct.h
    if not ct.required:
        return MCEstimate(0.0, 0.0, trials, seed, 0)
    table = ChildTable.from_tree(target.tree, h)
    span = sorted({t[:k] for t in ct.required for k in range(h + 1)}, key=lambda v: (len(v), v))
    leaves = [v for v in span if len(v) == h]
    x, y = ct.x, ct.y
    p, qd = x.numerator, x.denominator
    a, b = y.numerator, y.denominator
    if ((1 << h) * (qd + p) + qd) * b >= 1 << 62 or (a * qd) << h >= 1 << 62:
        raise OverflowError("point denominators too large for integer containment test")
    k = [int(t, 2) if t else 0 for t in leaves]
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        bits = edge_bits(seed, h, n, start=done)
        imgs = propagate_paths(table, bits, span)
        covered = np.zeros(n, dtype=bool)
        for t, kt in zip(leaves, k):
            m = imgs[t]
            # closed containment t + x s <= y <= t + x s + 2**-h, scaled to integers
            left = (kt * qd + m * p) * b
            yy = a * qd << h
            covered |= (left <= yy) & (yy <= left + qd * b)
        hits += int(covered.sum())
        done += n
    pr = hits / trials
    return MCEstimate(pr, math.sqrt(pr * (1 - pr) / trials), trials, seed, hits)


def cover_probability(point, target: PrunedTree, mode: str = "exact", h: int | None = None,
                      trials: int = 100_000, seed: int = 0, chunk: int = 10_000):
    """Probability that a random sticky family covers ``point``.

    ``exact`` returns a Fraction from a recursion over (base vertex, image)
    pairs; ``mc`` returns an :class:`MCEstimate` from ``trials`` sampled
    sticky maps (trial ``i`` of ``seed`` is the map ``sample_sticky`` builds
    for that trial).
    """
    h = target.height if h is None else h
    ct = possible_set(h, target, *point)
    if mode == "exact":
        return _cover_exact(ct, target)
    if mode == "mc":
        return _cover_mc(ct, target, trials, seed, chunk)
    raise ValueError(f"unknown mode {mode!r}")


def cover_bruteforce(point, target: PrunedTree, h: int | None = None) -> Fraction:
    """Average coverage over every edge-bit vector of the base tree (tiny ``h`` only)."""
    from .sticky import propagate_images

    h = target.height if h is None else h
    x, y = _check_point(*point)
    width = max(4, 1 << (h + 1))
    used = [heap_index(format(k, f"0{lv}b")) for lv in range(1, h + 1) for k in range(1 << lv)]
    if len(used) > 16:
        raise ValueError("too many edges to enumerate")
    n = 1 << len(used)
    bits = np.zeros((n, width), dtype=np.uint8)
    for i, col in enumerate(used):
        bits[:, col] = (np.arange(n) >> i) & 1
    imgs = propagate_images(ChildTable.from_tree(target.tree, h), bits)[-1]
    den = 1 << h
    # covers[k, m]: base k with slope m / 2**h contains the point
    covers = np.zeros((den, den), dtype=bool)
    for kk in range(den):
        for m in range(den):
            left = Fraction(kk, den) + x * Fraction(m, den)
            covers[kk, m] = left <= y <= left + Fraction(1, den)
    hit = covers[np.arange(den)[None, :], imgs].any(axis=1)
    return Fraction(int(hit.sum()), n)
