"""Directional maximal operators, sticky Kakeya families and tree percolation."""

from .dyadic_tree import DirTree, GeneratorSpec, TreeError, build_tree
from .structure import PrunedTree, lacunary_order, prune, split_numbers
from .sticky import StickyMap, is_sticky, mass_identity, sample_sticky

__version__ = "0.1.0"

__all__ = [
    "DirTree",
    "GeneratorSpec",
    "TreeError",
    "build_tree",
    "PrunedTree",
    "lacunary_order",
    "prune",
    "split_numbers",
    "StickyMap",
    "is_sticky",
    "mass_identity",
    "sample_sticky",
]
