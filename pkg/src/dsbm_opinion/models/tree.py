from typing import Any

import numpy as np
from attrs import define

from ..types import BoolArray, FloatArray, IntArray


@define(frozen=True, eq=False)
class GWTree:
    """Marked K-type Galton-Watson tree, stored one generation at a time

    Generation ``g`` is a set of parallel arrays indexed by node. A node's parent is
    an index into generation ``g - 1`` and its rank is its position among siblings, so
    the Ulam-Harris label of a node is the sequence of ranks along its ancestry.
    Generation 0 is the root alone.

    Attributes:
        root_type (int): 0-based type of the root
        K (int): number of types
        depth (int): number of generations below the root
        types (tuple[IntArray, ...]): node types per generation
        parents (tuple[IntArray, ...]): parent index per generation (empty for the root)
        ranks (tuple[IntArray, ...]): position among siblings
        weights (tuple[FloatArray, ...]): B_hat on the edge to the parent
        C_hat (tuple[FloatArray, ...]): weights normalized within each sibling group
        Pi (tuple[FloatArray, ...]): path weights, Pi of the root is 1
        offspring (tuple[IntArray, ...]): per node, child counts by type, for g < depth
    """

    root_type: int
    K: int
    depth: int
    types: tuple[IntArray, ...]
    parents: tuple[IntArray, ...]
    ranks: tuple[IntArray, ...]
    weights: tuple[FloatArray, ...]
    C_hat: tuple[FloatArray, ...]
    Pi: tuple[FloatArray, ...]
    offspring: tuple[IntArray, ...]

    def generation_size(self, g: int) -> int:
        return int(len(self.types[g]))

    @property
    def size(self) -> int:
        return sum(len(t) for t in self.types)

    def generation_pi_sum(self, g: int) -> float:
        """Sum of Pi over generation g"""
        return float(self.Pi[g].sum())

    def label(self, g: int, index: int) -> tuple[int, ...]:
        """Ulam-Harris label of node ``index`` of generation ``g``"""
        out: list[int] = []
        while g > 0:
            out.append(int(self.ranks[g][index]) + 1)
            index = int(self.parents[g][index])
            g -= 1
        return tuple(reversed(out))


@define(frozen=True, eq=False)
class NeighborhoodDiagnostic:
    """In-neighbourhood exploration of one vertex

    Attributes:
        vertex (int): explored vertex
        depth (int): exploration depth
        tree_by_depth (BoolArray): entry s says whether the depth-s exploration met no vertex twice
        census (IntArray): (depth + 1) x K type census per generation
        in_degrees (tuple[IntArray, ...]): in-degrees of the vertices of each generation
    """

    vertex: int
    depth: int
    tree_by_depth: BoolArray
    census: IntArray
    in_degrees: tuple[IntArray, ...]

    @property
    def is_tree(self) -> bool:
        return bool(self.tree_by_depth[self.depth])

    @property
    def explored(self) -> int:
        return int(self.census.sum())

    def to_dict(self) -> dict[str, Any]:
        return {
            "vertex": self.vertex,
            "depth": self.depth,
            "is_tree": self.is_tree,
            "explored": self.explored,
            "census": self.census.tolist(),
            "tree_by_depth": np.asarray(self.tree_by_depth).tolist(),
        }


__all__ = ["GWTree", "NeighborhoodDiagnostic"]
