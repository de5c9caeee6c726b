"""Sampling of directed stochastic block models and of their influence matrix"""

from collections.abc import Iterator
from pathlib import Path
from typing import TextIO

import numpy as np
from loguru import logger as log
from scipy import sparse

from .errors import SpecError
from .models import GraphSample, ModelSpec, RowStochasticMatrix
from .streams import Purpose, generator
from .types import FloatArray, IntArray

DENSE_EDGE_PROBABILITY = 0.25
DENSE_STORAGE_FRACTION = 0.25
DENSE_CHUNK = 1 << 22


def empirical_shares(labels: IntArray, K: int) -> FloatArray:
    """Exact label census divided by n"""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise SpecError.single("n", "at least one vertex is needed")
    return np.bincount(labels, minlength=K) / labels.size


def fixed_composition(pi: FloatArray, n: int) -> IntArray:
    """floor(n pi_r) per community, the remainder going to the largest fractional parts"""
    exact = pi * n
    counts = np.floor(exact).astype(np.int64)
    missing = n - int(counts.sum())
    if missing > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:missing]] += 1
    return counts


def sample_labels(
    spec: ModelSpec,
    n: int,
    seed: int,
    *,
    outer: int = 0,
) -> IntArray:
    """0-based community labels of ``n`` vertices

    ``spec.label_mode`` selects i.i.d. draws from pi or a fixed composition assigned
    to uniformly permuted vertex ids.
    """
    if n < 1:
        raise SpecError.single("n", f"at least one vertex is needed, got {n}")

    rng = generator(seed, Purpose.LABELS, outer=outer)
    if spec.label_mode == "fixed":
        counts = fixed_composition(spec.pi, n)
        labels = np.repeat(np.arange(spec.K), counts)
        return rng.permutation(labels).astype(np.int64)

    return rng.choice(spec.K, size=n, p=spec.pi).astype(np.int64)


def _dense_positions(rng: np.random.Generator, p: float, a: int, b: int) -> Iterator[IntArray]:
    if p >= 1.0:
        yield np.arange(a * b, dtype=np.int64)
        return
    rows_per_chunk = max(1, DENSE_CHUNK // max(b, 1))
    for start in range(0, a, rows_per_chunk):
        stop = min(a, start + rows_per_chunk)
        hits = np.flatnonzero(rng.random((stop - start) * b) < p)
        yield hits.astype(np.int64) + start * b


def _skip_positions(rng: np.random.Generator, p: float, m: int) -> Iterator[IntArray]:
    """Geometric gap skipping over m candidate pairs"""
    expected = m * p
    batch = int(expected + 5 * np.sqrt(expected) + 16)
    last = -1
    while True:
        positions = last + np.cumsum(rng.geometric(p, size=batch))
        inside = positions[positions < m]
        if inside.size:
            yield inside.astype(np.int64)
        if inside.size < positions.size:
            return
        last = int(positions[-1])


def block_edges(
    rng: np.random.Generator,
    p: float,
    listeners: IntArray,
    speakers: IntArray,
    *,
    dense_probability: float = DENSE_EDGE_PROBABILITY,
) -> tuple[IntArray, IntArray]:
    """Bernoulli(p) edges speaker -> listener over one block, self-loops removed"""
    a, b = len(listeners), len(speakers)
    if p <= 0.0 or a == 0 or b == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)

    if p >= dense_probability:
        chunks = list(_dense_positions(rng, p, a, b))
    else:
        chunks = list(_skip_positions(rng, p, a * b))
    positions = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)

    rows = listeners[positions // b]
    cols = speakers[positions % b]
    keep = rows != cols
    return rows[keep], cols[keep]


def sample_graph(
    spec: ModelSpec,
    labels: IntArray,
    theta: float,
    seed: int,
    *,
    outer: int = 0,
    inner: int = 0,
    dense_probability: float = DENSE_EDGE_PROBABILITY,
) -> GraphSample:
    """Realize edges, weights and beliefs on top of fixed labels

    The edge ``j -> i`` is present with probability ``min(kappa[J_j, J_i] theta / n, 1)``,
    independently over ordered pairs ``i != j``. Edges, weights and beliefs use separate
    streams of the ``(outer, inner)`` replication.
    """
    if not theta > 0:
        raise SpecError.single("theta", f"density parameter must be positive, got {theta}")

    labels = np.asarray(labels, dtype=np.int64)
    n = int(labels.size)
    pi_hat = empirical_shares(labels, spec.K)
    members = [np.flatnonzero(labels == r) for r in range(spec.K)]
    P = spec.edge_probabilities(n, theta)
    if spec.clipping_active(n, theta):
        log.warning(f"Edge probabilities clipped at 1 for n={n}, theta={theta:.6g}")

    edge_rng = generator(seed, Purpose.EDGES, outer=outer, inner=inner)
    weight_rng = generator(seed, Purpose.WEIGHTS, outer=outer, inner=inner)
    rows_, cols_, data_ = [], [], []
    for s in range(spec.K):
        for r in range(spec.K):
            p = float(P[s, r])
            rows, cols = block_edges(
                edge_rng,
                p,
                members[r],
                members[s],
                dense_probability=dense_probability,
            )
            log.debug(
                f"Block {s}->{r}: p={p:.4g}, "
                f"{'dense' if p >= dense_probability else 'skipping'} sampler, {rows.size} edges",
            )
            rows_.append(rows)
            cols_.append(cols)
            data_.append(spec.weight_dists[r][s].sample(weight_rng, rows.size))

    rows = np.concatenate(rows_)
    cols = np.concatenate(cols_)
    data = np.concatenate(data_)
    order = np.lexsort((cols, rows))
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))])
    adjacency = sparse.csr_array(
        (data[order], cols[order], indptr),
        shape=(n, n),
    )

    belief_rng = generator(seed, Purpose.BELIEFS, outer=outer, inner=inner)
    Q = np.zeros((n, spec.ell))
    for r, idx in enumerate(members):
        Q[idx] = spec.belief_dists[r].sample(belief_rng, idx.size)

    return GraphSample(
        n=n,
        K=spec.K,
        labels=labels,
        adjacency=adjacency,
        Q=Q,
        pi_hat=pi_hat,
        theta=float(theta),
    )


def normalize_weights(
    graph: GraphSample,
    *,
    dense_fraction: float = DENSE_STORAGE_FRACTION,
) -> RowStochasticMatrix:
    """Row-normalize the in-weights into C, zero rows where the weight sum is 0

    Storage turns dense when the mean in-degree exceeds ``dense_fraction * n``.
    """
    adjacency = graph.adjacency
    in_degree = graph.in_degree
    rows = np.repeat(np.arange(graph.n), in_degree)
    totals = np.bincount(rows, weights=adjacency.data, minlength=graph.n)

    scale = np.zeros(graph.n)
    positive = totals > 0
    scale[positive] = 1.0 / totals[positive]
    C = sparse.csr_array(
        (adjacency.data * scale[rows], adjacency.indices.copy(), adjacency.indptr.copy()),
        shape=adjacency.shape,
    )

    matrix: sparse.csr_array | FloatArray = C
    if graph.n and in_degree.mean() > dense_fraction * graph.n:
        log.debug(f"Mean in-degree {in_degree.mean():.1f} > {dense_fraction} n, dense storage")
        matrix = C.toarray()

    return RowStochasticMatrix(matrix=matrix, no_in_neighbors=in_degree == 0)


def dump_graph(graph: GraphSample, out: TextIO | str | Path) -> None:
    """Write the plain-text graph dump

    Header ``n K``, then one line ``i J_i Q_i1 ... Q_iell`` per vertex, then one line
    ``i j B_ij`` per edge ``j -> i``. Indices and communities are 0-based.
    """
    if isinstance(out, str | Path):
        with Path(out).open("w", encoding="utf-8", newline="\n") as stream:
            dump_graph(graph, stream)
        return

    out.write(f"{graph.n} {graph.K}\n")
    for i in range(graph.n):
        beliefs = " ".join(f"{q:.17g}" for q in graph.Q[i])
        out.write(f"{i} {graph.labels[i]} {beliefs}\n")
    rows, cols, data = graph.edges()
    for i, j, b in zip(rows, cols, data):
        out.write(f"{i} {j} {b:.17g}\n")


def load_graph(src: TextIO | str | Path) -> GraphSample:
    """Read a graph written by :func:`dump_graph`

    The dump does not store the density parameter, so ``theta`` of the returned
    graph is nan. Operations that need it take it as an explicit argument.
    """
    if isinstance(src, str | Path):
        with Path(src).open(encoding="utf-8") as stream:
            return load_graph(stream)

    n, K = (int(x) for x in src.readline().split())
    labels = np.zeros(n, dtype=np.int64)
    beliefs = []
    for _ in range(n):
        parts = src.readline().split()
        labels[int(parts[0])] = int(parts[1])
        beliefs.append([float(x) for x in parts[2:]])
    edges = np.array(
        [line.split() for line in src if line.strip()],
        dtype=float,
    ).reshape(-1, 3)
    rows, cols = edges[:, 0].astype(np.int64), edges[:, 1].astype(np.int64)
    order = np.lexsort((cols, rows))
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))])
    adjacency = sparse.csr_array((edges[order, 2], cols[order], indptr), shape=(n, n))
    return GraphSample(
        n=n,
        K=K,
        labels=labels,
        adjacency=adjacency,
        Q=np.asarray(beliefs, dtype=float).reshape(n, -1),
        pi_hat=empirical_shares(labels, K),
    )


__all__ = [
    "DENSE_EDGE_PROBABILITY",
    "DENSE_STORAGE_FRACTION",
    "block_edges",
    "dump_graph",
    "empirical_shares",
    "fixed_composition",
    "load_graph",
    "normalize_weights",
    "sample_graph",
    "sample_labels",
]
