"""Binary tree of dyadic intervals and finite-depth direction trees.

Vertices are plain bit strings, most significant bit first; the origin is
the empty string.  A vertex ``v`` stands for the dyadic interval
``[k / 2**h, (k + 1) / 2**h)`` with ``h = len(v)`` and ``k = int(v, 2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping

DyadicVertex = str

ROOT: DyadicVertex = ""


class TreeError(ValueError):
    """Raised for malformed vertices, leaf sets or generator specs."""


def check_vertex(v: str) -> str:
    if not isinstance(v, str) or any(ch not in "01" for ch in v):
        raise TreeError(f"not a binary string: {v!r}")
    return v


def height(v: DyadicVertex) -> int:
    return len(v)


def numerator(v: DyadicVertex) -> int:
    return int(v, 2) if v else 0


def interval(v: DyadicVertex) -> tuple[Fraction, Fraction]:
    """Closed-open dyadic interval identified with ``v``."""
    den = 1 << len(v)
    k = numerator(v)
    return Fraction(k, den), Fraction(k + 1, den)


def interval_length(v: DyadicVertex) -> Fraction:
    return Fraction(1, 1 << len(v))


def leaf_slope(v: DyadicVertex) -> Fraction:
    """Left endpoint of the interval of ``v``; a finite leaf stands for the ray continued by zeros."""
    return Fraction(numerator(check_vertex(v)), 1 << len(v))


def is_descendant(u: DyadicVertex, v: DyadicVertex) -> bool:
    """``u ⊆ v``: ``v`` is an ancestor of (or equal to) ``u``."""
    return u.startswith(v)


def parent(v: DyadicVertex) -> DyadicVertex:
    if not v:
        raise TreeError("the origin has no parent")
    return v[:-1]


def ancestors(v: DyadicVertex) -> list[DyadicVertex]:
    """All ancestors from the origin down to ``v`` inclusive."""
    return [v[:k] for k in range(len(v) + 1)]


def common_ancestor(u: DyadicVertex, v: DyadicVertex) -> DyadicVertex:
    """Deepest vertex containing both ``u`` and ``v`` (longest common prefix)."""
    n = 0
    for a, b in zip(u, v):
        if a != b:
            break
        n += 1
    return u[:n]


def dyadic_distance(u: DyadicVertex, v: DyadicVertex) -> Fraction:
    return interval_length(common_ancestor(u, v))


@dataclass(frozen=True)
class DirTree:
    """Finite-depth rooted subtree of the binary tree.

    Every retained vertex lies on a root-to-depth path, so there are no dead
    ends above ``depth``.
    """

    depth: int
    leaves: frozenset[str]
    vertices: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.depth < 0:
            raise TreeError("depth must be nonnegative")
        if not self.leaves:
            raise TreeError("a direction tree needs at least one leaf")
        for leaf in self.leaves:
            check_vertex(leaf)
            if len(leaf) != self.depth:
                raise TreeError(f"leaf {leaf!r} does not have length {self.depth}")
        verts = {leaf[:k] for leaf in self.leaves for k in range(self.depth + 1)}
        object.__setattr__(self, "vertices", frozenset(verts))

    def __contains__(self, v: object) -> bool:
        return v in self.vertices

    def __len__(self) -> int:
        return len(self.vertices)

    def _require(self, v: str) -> None:
        if v not in self.vertices:
            raise TreeError(f"vertex {v!r} is not in the tree")

    def children(self, v: DyadicVertex) -> tuple[DyadicVertex, ...]:
        self._require(v)
        if len(v) >= self.depth:
            return ()
        return tuple(c for c in (v + "0", v + "1") if c in self.vertices)

    def is_splitting(self, v: DyadicVertex) -> bool:
        return len(self.children(v)) == 2

    def shadow_leaves(self, v: DyadicVertex) -> frozenset[str]:
        self._require(v)
        return frozenset(leaf for leaf in self.leaves if leaf.startswith(v))

    def sorted_leaves(self) -> list[str]:
        return sorted(self.leaves)

    def level(self, k: int) -> list[str]:
        return sorted(v for v in self.vertices if len(v) == k)

    def iter_vertices(self) -> list[str]:
        """Vertices ordered by (height, bits)."""
        return sorted(self.vertices, key=lambda v: (len(v), v))

    def slopes(self) -> list[Fraction]:
        return [leaf_slope(leaf) for leaf in self.sorted_leaves()]

    def subtree(self, v: DyadicVertex) -> "DirTree":
        """The part of the tree below ``v``, re-rooted so ``v`` becomes the origin."""
        self._require(v)
        n = len(v)
        return DirTree(self.depth - n, frozenset(leaf[n:] for leaf in self.shadow_leaves(v)))

    def truncate(self, depth: int) -> "DirTree":
        if not 0 <= depth <= self.depth:
            raise TreeError(f"cannot truncate depth {self.depth} tree to {depth}")
        return DirTree(depth, frozenset(leaf[:depth] for leaf in self.leaves))

    def to_dict(self) -> dict:
        return {"depth": self.depth, "leaves": self.sorted_leaves()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "DirTree":
        try:
            return cls(int(data["depth"]), frozenset(data["leaves"]))
        except KeyError as exc:
            raise TreeError(f"tree JSON missing field {exc}") from None


# -- generators ----------------------------------------------------------------

GENERATOR_KINDS = ("full", "single-ray", "explicit-leaves", "lacunary-chain", "cantor-pattern")

_PATTERN_STEPS = {"branch": "01", "keep-left": "0", "keep-right": "1"}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    depth: int
    params: Mapping = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeneratorSpec":
        data = dict(data)
        try:
            kind = data.pop("kind")
        except KeyError:
            raise TreeError("generator spec needs a 'kind'") from None
        if kind not in GENERATOR_KINDS:
            raise TreeError(f"unknown generator kind {kind!r}")
        depth = data.pop("depth", None)
        if depth is None:
            if kind == "single-ray" and "bits" in data:
                depth = len(data["bits"])
            elif kind == "explicit-leaves" and data.get("leaves"):
                depth = len(data["leaves"][0])
            else:
                raise TreeError(f"generator {kind!r} needs a 'depth'")
        return cls(kind, int(depth), data)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "depth": self.depth, **dict(self.params)}


def full_tree(depth: int) -> DirTree:
    return DirTree(depth, frozenset("".join(b) for b in product("01", repeat=depth)))


def single_ray(bits: str) -> DirTree:
    return DirTree(len(bits), frozenset([check_vertex(bits)]))


def _chain_leaves(depth: int, order: int, spine_bit: str = "0",
                  branches: Iterable[int] | None = None) -> set[str]:
    # spine of repeated spine_bit; off-spine child at each branch height carries an order-1 lower chain
    spine = spine_bit * depth
    leaves = {spine}
    if order <= 0:
        return leaves
    heights = range(depth) if branches is None else branches
    off = "1" if spine_bit == "0" else "0"
    for k in heights:
        if not 0 <= k < depth:
            raise TreeError(f"branch height {k} outside [0, {depth})")
        rest = depth - k - 1
        for tail in _chain_leaves(rest, order - 1, spine_bit):
            leaves.add(spine[:k] + off + tail)
    return leaves


def lacunary_chain(depth: int, order: int = 1, branches: Iterable[int] | None = None,
                   spine: str | None = None) -> DirTree:
    """Order-``order`` lacunary tree around a spine (default all zeros).

    The top-level spine branches at ``branches`` (default every height); each
    off-spine subtree is a lacunary chain of one order lower.
    """
    if order < 0:
        raise TreeError("order must be nonnegative")
    leaves = _chain_leaves(depth, order, "0", branches)
    if spine is not None:
        check_vertex(spine)
        if len(spine) != depth:
            raise TreeError("spine length must equal depth")
        # relabel: xor every leaf with the spine so the all-zero ray maps onto it
        leaves = {"".join("1" if a != b else "0" for a, b in zip(leaf, spine)) for leaf in leaves}
    return DirTree(depth, frozenset(leaves))


def cantor_pattern(depth: int, pattern: Iterable[str] | str) -> DirTree:
    """Periodic pattern of steps: 'branch' keeps both children, 'keep-left'/'keep-right' one."""
    if isinstance(pattern, str):
        pattern = [p.strip() for p in pattern.split(",") if p.strip()]
    steps = list(pattern)
    if not steps:
        raise TreeError("empty cantor pattern")
    for s in steps:
        if s not in _PATTERN_STEPS:
            raise TreeError(f"unknown pattern step {s!r}")
    choices = [_PATTERN_STEPS[steps[k % len(steps)]] for k in range(depth)]
    return DirTree(depth, frozenset("".join(c) for c in product(*choices)))


def build_tree(spec: GeneratorSpec | Mapping) -> DirTree:
    if not isinstance(spec, GeneratorSpec):
        spec = GeneratorSpec.from_dict(spec)
    p = dict(spec.params)
    h = spec.depth
    if spec.kind == "full":
        return full_tree(h)
    if spec.kind == "single-ray":
        bits = p.get("bits", "0" * h)
        if len(bits) != h:
            raise TreeError("single-ray bits must have length depth")
        return single_ray(bits)
    if spec.kind == "explicit-leaves":
        leaves = p.get("leaves")
        if not leaves:
            raise TreeError("explicit-leaves needs a nonempty 'leaves' list")
        return DirTree(h, frozenset(check_vertex(str(leaf)) for leaf in leaves))
    if spec.kind == "lacunary-chain":
        return lacunary_chain(h, int(p.get("order", 1)), p.get("branches"), p.get("spine"))
    if spec.kind == "cantor-pattern":
        return cantor_pattern(h, p.get("pattern", "branch,keep-left"))
    raise TreeError(f"unknown generator kind {spec.kind!r}")


def tree_from_masks(masks: Mapping[str, str], depth: int) -> DirTree:
    """Build a tree from child masks ('0', '1' or '01') keyed by vertex."""
    leaves = []
    stack = [ROOT]
    while stack:
        v = stack.pop()
        if len(v) == depth:
            leaves.append(v)
            continue
        mask = masks[v]
        if mask not in ("0", "1", "01"):
            raise TreeError(f"bad child mask {mask!r} at {v!r}")
        stack.extend(v + b for b in mask)
    return DirTree(depth, frozenset(leaves))
