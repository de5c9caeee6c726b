"""Marked K-type Galton-Watson trees and graph-side tree-likeness"""

import math
from collections.abc import Sequence

import numpy as np
from loguru import logger as log

from .errors import BudgetExceeded, DimensionMismatch, SpecError
from .models import GraphSample, GWTree, ModelSpec, NeighborhoodDiagnostic, TreeLikenessRow, VectorLaw
from .runner import Runner
from .streams import Purpose, generator
from .types import Estimate, FloatArray, IntArray

DEFAULT_NODE_BUDGET = 1_000_000
CHUNK = 256


def offspring_means(spec: ModelSpec, pi_hat: FloatArray, theta: float) -> FloatArray:
    """q[s, r] = kappa(s, r) pi_hat_s theta, the mean number of type-s children of a type-r node"""
    return spec.kappa * np.asarray(pi_hat, dtype=float)[:, None] * float(theta)


def expected_tree_size(q: FloatArray, depth: int) -> float:
    rho = float(q.sum(axis=0).max()) if q.size else 0.0
    return float(sum(rho**g for g in range(depth + 1)))


def sample_tree(
    root_type: int,
    q: FloatArray,
    depth: int,
    spec: ModelSpec,
    rng: np.random.Generator | int,
    *,
    budget: float = DEFAULT_NODE_BUDGET,
) -> GWTree:
    """Grow a tree generation by generation

    A type-r node has independent Poisson(q[s, r]) children of each type s, placed in
    uniformly random order; the edge to the parent carries B_hat ~ G[parent][child].
    """
    if depth < 0:
        raise SpecError.single("depth", f"tree depth must be >= 0, got {depth}")
    expected = expected_tree_size(q, depth)
    if expected > budget:
        raise BudgetExceeded("tree size", expected, budget)
    if isinstance(rng, int):
        rng = generator(rng, Purpose.TREE, extra=root_type)

    K = spec.K
    types = [np.array([root_type], dtype=np.int64)]
    parents = [np.empty(0, dtype=np.int64)]
    ranks = [np.zeros(1, dtype=np.int64)]
    weights = [np.empty(0)]
    C_hat = [np.empty(0)]
    Pi = [np.ones(1)]
    offspring: list[IntArray] = []

    for _ in range(depth):
        current = types[-1]
        m = current.size
        N = rng.poisson(q[:, current].T).astype(np.int64).reshape(m, K)
        offspring.append(N)
        totals = N.sum(axis=1)

        child_types = np.repeat(np.tile(np.arange(K), m), N.ravel())
        parent = np.repeat(np.arange(m), totals)
        order = np.lexsort((rng.random(parent.size), parent))
        child_types = child_types[order]
        starts = np.cumsum(totals) - totals
        rank = np.arange(parent.size) - starts[parent]

        B = np.zeros(parent.size)
        parent_types = current[parent]
        for r in range(K):
            for s in range(K):
                mask = (parent_types == r) & (child_types == s)
                count = int(mask.sum())
                if count:
                    B[mask] = spec.weight_dists[r][s].sample(rng, count)

        sums = np.bincount(parent, weights=B, minlength=m)
        scale = np.divide(1.0, sums, out=np.zeros(m), where=sums > 0)
        C = B * scale[parent]

        types.append(child_types)
        parents.append(parent)
        ranks.append(rank)
        weights.append(B)
        C_hat.append(C)
        Pi.append(Pi[-1][parent] * C)

    return GWTree(
        root_type=int(root_type),
        K=K,
        depth=depth,
        types=tuple(types),
        parents=tuple(parents),
        ranks=tuple(ranks),
        weights=tuple(weights),
        C_hat=tuple(C_hat),
        Pi=tuple(Pi),
        offspring=tuple(offspring),
    )


def weighted_generation_sum(
    tree: GWTree,
    s: int,
    x_assign: FloatArray | Sequence[VectorLaw],
    *,
    rng: np.random.Generator | None = None,
    per_node: bool = False,
) -> FloatArray:
    """sum over generation s of Pi_i X_hat_i, one value per topic

    ``x_assign`` is a per-type array (K,) or (K, ell), a per-node array when
    ``per_node`` is set, or one vector law per type drawn independently per node.
    """
    if not 0 <= s <= tree.depth:
        raise SpecError.single("s", f"generation {s} is not inside a tree of depth {tree.depth}")
    node_types = tree.types[s]
    if per_node:
        X = np.asarray(x_assign, dtype=float)
        if X.shape[0] != node_types.size:
            raise DimensionMismatch("x_assign", (node_types.size,), X.shape)
        return np.asarray(np.tensordot(tree.Pi[s], X, axes=(0, 0)))
    if len(x_assign) != tree.K:
        raise DimensionMismatch("x_assign", (tree.K,), (len(x_assign),))
    if isinstance(x_assign, np.ndarray) or not isinstance(x_assign[0], VectorLaw):
        X = np.asarray(x_assign, dtype=float)[node_types]
    else:
        if rng is None:
            raise SpecError.single("rng", "random X assignment needs a generator")
        ell = x_assign[0].ell
        X = np.zeros((node_types.size, ell))
        for r, law in enumerate(x_assign):
            idx = np.flatnonzero(node_types == r)
            if idx.size:
                X[idx] = law.sample(rng, idx.size)
    weights = tree.Pi[s]
    return np.asarray(np.tensordot(weights, X, axes=(0, 0)))


def _a_s_chunk(
    root_type: int,
    s: int,
    x: FloatArray,
    target: FloatArray,
    q: FloatArray,
    spec: ModelSpec,
    x_laws: Sequence[VectorLaw] | None,
    seed: int,
    start: int,
    stop: int,
    budget: float,
) -> FloatArray:
    out = np.empty(stop - start)
    for rep in range(start, stop):
        rng = generator(seed, Purpose.TREE, inner=rep, extra=root_type)
        tree = sample_tree(root_type, q, s, spec, rng, budget=budget)
        assign = x if x_laws is None else x_laws
        value = weighted_generation_sum(tree, s, assign, rng=rng)
        out[rep - start] = float(np.abs(value - target).sum())
    return out


def estimate_a_s(
    root_type: int,
    s: int,
    x: FloatArray,
    M_breve: FloatArray,
    replications: int,
    seed: int,
    *,
    q: FloatArray,
    spec: ModelSpec,
    x_laws: Sequence[VectorLaw] | None = None,
    runner: Runner | None = None,
    budget: float = DEFAULT_NODE_BUDGET,
) -> Estimate:
    """Monte Carlo mean of |sum_{|i|=s} Pi_i X_hat_i - (M_breve^s x)_r| over independent trees

    X_hat is ``x`` by type, or drawn from ``x_laws`` (whose means should be ``x``).
    For several topics the deviation is the l1 norm over topics.
    """
    if replications < 1:
        raise BudgetExceeded("tree replications", 0, replications)
    runner = runner or Runner(seed)
    x = np.asarray(x, dtype=float)
    target = (np.linalg.matrix_power(M_breve, s) @ x)[root_type]
    units = [
        (root_type, s, x, target, q, spec, x_laws, seed, start, min(start + CHUNK, replications), budget)
        for start in range(0, replications, CHUNK)
    ]
    deviations = np.concatenate(runner.map(_a_s_chunk, units))
    log.debug(f"a_{s}({root_type}) from {replications} trees")
    return Estimate.from_samples(deviations)


def one_generation_bound(theta: float, Delta: float, Lambda: float, H: float) -> float:
    """4 sqrt(3 Delta pi / theta) + 8 exp(-theta / (27 Delta (H Lambda)^2))"""
    return 4 * math.sqrt(3 * Delta * math.pi / theta) + 8 * math.exp(-theta / (27 * Delta * (H * Lambda) ** 2))


def neighborhood_diagnostic(graph: GraphSample, vertex: int, depth: int) -> NeighborhoodDiagnostic:
    """Breadth-first exploration of in-edges from ``vertex``

    The exploration is a tree up to depth s when no vertex, the root included, is
    reached twice within the first s generations.
    """
    tree_by_depth = np.zeros(depth + 1, dtype=bool)
    census = np.zeros((depth + 1, graph.K), dtype=np.int64)
    in_degrees = []

    generation = np.array([vertex], dtype=np.int64)
    visited = np.zeros(graph.n, dtype=bool)
    visited[vertex] = True
    is_tree = True
    tree_by_depth[0] = True
    census[0] = np.bincount(graph.labels[generation], minlength=graph.K)
    in_degrees.append(graph.in_degree[generation])

    for g in range(1, depth + 1):
        reached = graph.adjacency[generation].indices.astype(np.int64) if generation.size else generation
        unique = np.unique(reached)
        if unique.size != reached.size or visited[unique].any():
            is_tree = False
        generation = unique[~visited[unique]]
        visited[generation] = True
        tree_by_depth[g] = is_tree
        census[g] = np.bincount(graph.labels[generation], minlength=graph.K)
        in_degrees.append(graph.in_degree[generation])

    return NeighborhoodDiagnostic(
        vertex=int(vertex),
        depth=depth,
        tree_by_depth=tree_by_depth,
        census=census,
        in_degrees=tuple(in_degrees),
    )


def tree_likeness(
    graph: GraphSample,
    depth: int,
    vertices: IntArray | Sequence[int] | None = None,
) -> TreeLikenessRow:
    """Fraction of explored vertices whose depth-s in-neighbourhood is not a tree"""
    if vertices is None:
        vertices = np.arange(graph.n)
    vertices = np.asarray(vertices, dtype=np.int64)
    failures = sum(not neighborhood_diagnostic(graph, int(i), depth).is_tree for i in vertices)
    return TreeLikenessRow(
        n=graph.n,
        theta=graph.theta,
        depth=depth,
        vertex_count_checked=int(vertices.size),
        non_tree_fraction=failures / vertices.size if vertices.size else 0.0,
    )


__all__ = [
    "DEFAULT_NODE_BUDGET",
    "estimate_a_s",
    "expected_tree_size",
    "neighborhood_diagnostic",
    "offspring_means",
    "one_generation_bound",
    "sample_tree",
    "tree_likeness",
    "weighted_generation_sum",
]
