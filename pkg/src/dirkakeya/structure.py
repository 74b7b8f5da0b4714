"""Splitting numbers, pruned trees and lacunary decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .dyadic_tree import ROOT, DirTree, TreeError, common_ancestor, leaf_slope

__all__ = [
    "SplitAnnotation",
    "PrunedTree",
    "LacunaryDecomposition",
    "split_numbers",
    "prune",
    "lacunary_order",
    "four_sequences",
    "common_ancestor",
]


@dataclass(frozen=True)
class SplitAnnotation:
    values: dict[str, int]
    tree_split: int

    def __getitem__(self, v: str) -> int:
        return self.values[v]

    def maximal_vertices(self) -> list[str]:
        return sorted(v for v, s in self.values.items() if s == self.tree_split)


def split_numbers(tree: DirTree) -> SplitAnnotation:
    """Splitting number of every vertex via the max/min recursion.

    A vertex with one child inherits the child's value; with children of
    values ``a`` and ``b`` it gets ``max(a, b, 1 + min(a, b))``.
    """
    values: dict[str, int] = {}
    for v in sorted(tree.vertices, key=len, reverse=True):
        kids = tree.children(v)
        if not kids:
            values[v] = 0
        elif len(kids) == 1:
            values[v] = values[kids[0]]
        else:
            a, b = values[kids[0]], values[kids[1]]
            values[v] = max(a, b, 1 + min(a, b))
    return SplitAnnotation(values, max(values.values()))


@dataclass(frozen=True)
class PrunedTree:
    """A pruned subtree with its splitting generations.

    ``generations[0]`` is the origin of the analysed tree.  Each later
    generation holds, for every vertex of the previous one, the first branch
    point below each child of the previous vertex's branch point; the last
    generation holds the children of the final branch points.
    """

    tree: DirTree
    generations: tuple[tuple[str, ...], ...]
    branch_points: tuple[str, ...]
    split: int
    root: str = ROOT
    source: DirTree | None = field(default=None, compare=False, repr=False)

    @property
    def height(self) -> int:
        """Working depth: one below the deepest splitting vertex, or the full depth for a ray."""
        if not self.branch_points:
            return self.tree.depth
        return 1 + max(len(b) for b in self.branch_points)

    def working_tree(self) -> DirTree:
        return self.tree.truncate(self.height)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "root": self.root,
            "height": self.height,
            "generations": [list(g) for g in self.generations],
            "tree": self.tree.to_dict(),
        }


def _branch_point(tree: DirTree, splits: SplitAnnotation, v: str, need: int) -> str:
    # topmost descendant of v whose two children both have split >= need - 1
    while True:
        kids = tree.children(v)
        if len(kids) == 2:
            a, b = splits[kids[0]], splits[kids[1]]
            if min(a, b) >= need - 1:
                return v
            v = kids[0] if a >= b else kids[1]
        elif len(kids) == 1:
            v = kids[0]
        else:
            raise TreeError(f"no branch point of level {need} below {v!r}")


def _leftmost_ray(tree: DirTree, v: str) -> list[str]:
    path = [v]
    while len(v) < tree.depth:
        v = tree.children(v)[0]
        path.append(v)
    return path


def prune(tree: DirTree) -> PrunedTree:
    """Extract a pruned subtree with the same splitting number.

    Below each child of a branch point the procedure keeps the candidate of
    minimal height; the deterministic descent used here always finds that
    candidate, so no lexicographic tie-break is ever exercised.
    """
    splits = split_numbers(tree)
    n = splits.tree_split
    # the origin always attains the maximum at finite depth; keep the general form anyway
    root = min(splits.maximal_vertices(), key=lambda v: (len(v), v))
    if root != ROOT:
        return _reroot(tree, root)

    kept: set[str] = set()
    generations: list[tuple[str, ...]] = [(ROOT,)]
    branch_points: list[str] = []
    current = [ROOT]
    for j in range(n):
        need = n - j
        nxt: list[str] = []
        for v in current:
            b = _branch_point(tree, splits, v, need)
            kept.update(b[:k] for k in range(len(v), len(b) + 1))
            branch_points.append(b)
            for c in tree.children(b):
                if j + 1 < n:
                    u = _branch_point(tree, splits, c, need - 1)
                else:
                    u = c
                kept.update(u[:k] for k in range(len(c), len(u) + 1))
                nxt.append(u)
        nxt.sort()
        generations.append(tuple(nxt))
        current = nxt
    leaves = set()
    for v in current:
        ray = _leftmost_ray(tree, v)
        kept.update(ray)
        leaves.add(ray[-1])
    kept.add(ROOT)
    pruned = DirTree(tree.depth, frozenset(leaves))
    assert pruned.vertices <= tree.vertices
    return PrunedTree(pruned, tuple(generations), tuple(sorted(branch_points, key=lambda v: (len(v), v))),
                      n, ROOT, tree)


def _reroot(tree: DirTree, root: str) -> PrunedTree:
    sub = prune(tree.subtree(root))
    return PrunedTree(sub.tree, sub.generations, sub.branch_points, sub.split, root, tree)


@dataclass(frozen=True)
class LacunaryDecomposition:
    order: int
    root: str
    spine: str
    children: tuple["LacunaryDecomposition", ...] = ()

    def spine_vertices(self) -> list[str]:
        return [self.spine[:k] for k in range(len(self.root), len(self.spine) + 1)]

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "root": self.root,
            "spine": self.spine,
            "children": [c.to_dict() for c in self.children],
        }


def _decompose(tree: DirTree, splits: SplitAnnotation, root: str) -> LacunaryDecomposition:
    spine = [root]
    v = root
    while len(v) < tree.depth:
        kids = tree.children(v)
        # follow the child of larger split, ties to the left
        v = max(kids, key=lambda c: (splits[c], c == kids[0]))
        spine.append(v)
    on_spine = set(spine)
    subs = []
    for u in spine[:-1]:
        for c in tree.children(u):
            if c not in on_spine:
                subs.append(_decompose(tree, splits, c))
    return LacunaryDecomposition(splits[root], root, spine[-1], tuple(subs))


def lacunary_order(tree: DirTree) -> LacunaryDecomposition:
    """Recursive spine decomposition; the reported order equals the splitting number."""
    return _decompose(tree, split_numbers(tree), ROOT)


def four_sequences(decomp: LacunaryDecomposition, tree: DirTree) -> tuple[list[Fraction], ...]:
    """Cover the leaf slopes of an order-1 tree by four sequences converging to the spine slope.

    Leaves above the spine slope go to the first two lists, those below to the
    last two; within each side the parity of the branching height picks the
    list.  Each list is ordered by decreasing dyadic distance to the spine.
    """
    if decomp.order != 1:
        raise TreeError(f"four_sequences needs an order-1 decomposition, got order {decomp.order}")
    s = leaf_slope(decomp.spine)
    buckets: dict[tuple[bool, int], list[tuple[int, Fraction]]] = {
        (side, parity): [] for side in (True, False) for parity in (0, 1)
    }
    for leaf in tree.leaves:
        if leaf == decomp.spine:
            continue
        k = len(common_ancestor(leaf, decomp.spine))
        a = leaf_slope(leaf)
        buckets[(a > s, k % 2)].append((k, a))
    out = []
    for key in ((True, 0), (True, 1), (False, 0), (False, 1)):
        out.append([a for _, a in sorted(buckets[key])])
    return tuple(out)
