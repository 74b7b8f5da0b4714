"""Sticky maps from the full binary tree into a pruned tree.

Random maps are driven by one fair bit per edge of the base tree.  Bits are
indexed by the heap position of the child vertex (``2**len(u) + int(u, 2)``)
and drawn as uniform doubles from a seeded :class:`numpy.random.Generator`,
so a master seed and trial index address a map exactly.  A bit is only
consulted when the current image vertex splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .dyadic_tree import ROOT, DirTree, interval_length, is_descendant
from .structure import PrunedTree

def heap_index(v: str) -> int:
    return (1 << len(v)) | (int(v, 2) if v else 0)


def _vertex(level: int, k: int) -> str:
    return format(k, f"0{level}b") if level else ""


@dataclass(frozen=True)
class ChildTable:
    """Per-level lookup of the target's children, indexed by vertex numerator."""

    depth: int
    splits: tuple[np.ndarray, ...]
    forced: tuple[np.ndarray, ...]

    @classmethod
    def from_tree(cls, tree: DirTree, depth: int) -> "ChildTable":
        splits, forced = [], []
        for level in range(depth):
            sp = np.zeros(1 << level, dtype=bool)
            fc = np.full(1 << level, -1, dtype=np.int64)
            for v in tree.level(level):
                k = int(v, 2) if v else 0
                kids = tree.children(v)
                if len(kids) == 2:
                    sp[k] = True
                    fc[k] = 2 * k
                else:
                    fc[k] = 2 * k + int(kids[0][-1])
            splits.append(sp)
            forced.append(fc)
        return cls(depth, tuple(splits), tuple(forced))


def edge_bits(seed: int, depth: int, n: int = 1, start: int = 0) -> np.ndarray:
    """Fair bits for ``n`` consecutive trials, shape ``(n, 2**(depth+1))``, heap indexed."""
    rng = np.random.Generator(np.random.Philox(key=seed & ((1 << 64) - 1)))
    # Philox emits four words per counter step; keep rows a whole number of steps wide
    width = max(4, 1 << (depth + 1))
    if start:
        rng.bit_generator.advance(start * width // 4)
    return (rng.random((n, width)) < 0.5).astype(np.uint8)


def propagate_images(table: ChildTable, bits: np.ndarray) -> list[np.ndarray]:
    """Image numerators per level for a batch of bit vectors.

    Returns a list indexed by level; entry ``k`` has shape ``(n, 2**k)``.
    """
    n = bits.shape[0]
    images = [np.zeros((n, 1), dtype=np.int64)]
    for level in range(table.depth):
        parent_img = np.repeat(images[-1], 2, axis=1)
        lo = 1 << (level + 1)
        r = bits[:, lo:2 * lo].astype(np.int64)
        sp = table.splits[level][parent_img]
        child = np.where(sp, 2 * parent_img + r, table.forced[level][parent_img])
        images.append(child)
    return images


def propagate_paths(table: ChildTable, bits: np.ndarray, vertices: list[str]) -> dict[str, np.ndarray]:
    """Images of a prefix-closed vertex set only; same bits, same maps."""
    order = sorted(vertices, key=lambda v: (len(v), v))
    out: dict[str, np.ndarray] = {ROOT: np.zeros(bits.shape[0], dtype=np.int64)}
    for v in order:
        if not v:
            continue
        p = out[v[:-1]]
        level = len(v) - 1
        r = bits[:, heap_index(v)].astype(np.int64)
        out[v] = np.where(table.splits[level][p], 2 * p + r, table.forced[level][p])
    return out


@dataclass(frozen=True)
class StickyMap:
    target: PrunedTree
    depth: int
    assignment: Mapping[str, str]
    seed: int | None = None

    def __call__(self, u: str) -> str:
        return self.assignment[u]

    def leaf_images(self) -> dict[str, str]:
        return {u: v for u, v in self.assignment.items() if len(u) == self.depth}

    def preimage(self, v: str) -> list[str]:
        return sorted(u for u, w in self.assignment.items() if w == v)

    def to_dict(self) -> dict:
        return {
            "target": self.target.tree.to_dict(),
            "depth": self.depth,
            "seed": self.seed,
            "leaf_images": dict(sorted(self.leaf_images().items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_leaf_images(cls, target: PrunedTree, leaf_images: Mapping[str, str],
                         seed: int | None = None) -> "StickyMap":
        depth = len(next(iter(leaf_images)))
        assignment: dict[str, str] = {}
        for u, v in leaf_images.items():
            for k in range(depth + 1):
                prev = assignment.setdefault(u[:k], v[:k])
                if prev != v[:k]:
                    raise ValueError(f"leaf images disagree at {u[:k]!r}; not sticky")
        return cls(target, depth, assignment, seed)


def _resolve_depth(target: PrunedTree, depth: int | None) -> int:
    h = target.height if depth is None else depth
    if not 0 <= h <= target.tree.depth:
        raise ValueError(f"depth {h} outside target depth {target.tree.depth}")
    return h


def sample_sticky(target: PrunedTree, seed: int, depth: int | None = None, trial: int = 0) -> StickyMap:
    """Random sticky map; ``trial`` selects the map within the seed's stream."""
    h = _resolve_depth(target, depth)
    table = ChildTable.from_tree(target.tree, h)
    images = propagate_images(table, edge_bits(seed, h, 1, start=trial))
    assignment = {}
    for level, arr in enumerate(images):
        for k, img in enumerate(arr[0]):
            assignment[_vertex(level, k)] = _vertex(level, int(img))
    return StickyMap(target, h, assignment, seed)


def sample_leaf_images(target: PrunedTree, seed: int, n: int, depth: int | None = None) -> np.ndarray:
    """Leaf image numerators for ``n`` maps, shape ``(n, 2**depth)``; row ``i`` is trial ``i``."""
    h = _resolve_depth(target, depth)
    table = ChildTable.from_tree(target.tree, h)
    return propagate_images(table, edge_bits(seed, h, n))[-1]


def is_sticky(assignment: Mapping[str, str], target: PrunedTree | DirTree, depth: int | None = None) -> bool:
    """Height preserving, origin fixing, images in the target, ancestry preserving on parent/child pairs."""
    tree = target.tree if isinstance(target, PrunedTree) else target
    if depth is None:
        depth = max(len(u) for u in assignment)
    if assignment.get(ROOT) != ROOT:
        return False
    for level in range(depth + 1):
        for k in range(1 << level):
            u = _vertex(level, k)
            v = assignment.get(u)
            if v is None or len(v) != level or v not in tree.vertices:
                return False
            if level and not is_descendant(v, assignment[u[:-1]]):
                return False
    return True


def mass_identity(sigma: StickyMap) -> list[Fraction]:
    """Per generation, total length of the maximal preimage intervals of that generation."""
    gens = sigma.target.generations
    inverse: dict[str, list[str]] = {}
    for u, v in sigma.assignment.items():
        inverse.setdefault(v, []).append(u)
    out = []
    for k, gen in enumerate(gens):
        for v in gen:
            if len(v) > sigma.depth:
                raise ValueError(f"generation {k} vertex {v!r} lies below the map depth {sigma.depth}")
        pre = [u for v in gen for u in inverse.get(v, [])]
        pre_set = set(pre)
        maximal = [u for u in pre if not any(u[:k] in pre_set for k in range(len(u)))]
        out.append(sum((interval_length(u) for u in maximal), Fraction(0)))
    return out
