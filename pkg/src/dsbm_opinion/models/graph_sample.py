from typing import Literal

import numpy as np
from attrs import define, field
from scipy import sparse

from ..errors import DimensionMismatch
from ..types import BoolArray, FloatArray, IntArray

Storage = Literal["sparse", "dense"]


@define(frozen=True, eq=False)
class GraphSample:
    """One realized dSBM

    The in-adjacency is a CSR array whose row ``i`` holds the in-neighbours ``j`` of
    vertex ``i`` (edges ``j -> i``) with the unnormalized weight ``B_ij`` as the stored
    value. Edges whose weight is drawn as 0 are kept as explicit entries.

    Attributes:
        n (int): vertex count
        K (int): community count
        labels (IntArray): 0-based community of every vertex
        adjacency (sparse.csr_array): n x n in-adjacency carrying B
        Q (FloatArray): n x ell internal beliefs
        pi_hat (FloatArray): empirical community shares
        theta (float): density parameter the graph was sampled with
    """

    n: int
    K: int
    labels: IntArray
    adjacency: sparse.csr_array
    Q: FloatArray
    pi_hat: FloatArray
    theta: float = field(default=float("nan"))

    @property
    def ell(self) -> int:
        return int(self.Q.shape[1])

    @property
    def in_degree(self) -> IntArray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.indptr[-1])

    @property
    def no_in_neighbors(self) -> BoolArray:
        """The indicator d_i^- = 0"""
        return self.in_degree == 0

    @property
    def community_counts(self) -> IntArray:
        return np.bincount(self.labels, minlength=self.K).astype(np.int64)

    def in_lists(self, i: int) -> IntArray:
        """In-neighbours of vertex ``i``"""
        start, stop = self.adjacency.indptr[i], self.adjacency.indptr[i + 1]
        return np.asarray(self.adjacency.indices[start:stop], dtype=np.int64)

    def in_weights(self, i: int) -> FloatArray:
        start, stop = self.adjacency.indptr[i], self.adjacency.indptr[i + 1]
        return np.asarray(self.adjacency.data[start:stop], dtype=float)

    def edges(self) -> tuple[IntArray, IntArray, FloatArray]:
        """(listener, speaker, weight) triplets of every stored edge"""
        rows = np.repeat(np.arange(self.n), self.in_degree)
        return rows, self.adjacency.indices.astype(np.int64), self.adjacency.data.astype(float)


@define(frozen=True, eq=False)
class RowStochasticMatrix:
    """The normalized influence matrix C with the zero in-degree indicator

    Attributes:
        matrix (sparse.csr_array | FloatArray): n x n, rows sum to 1 or 0
        no_in_neighbors (BoolArray): per vertex, whether d_i^- = 0
    """

    matrix: sparse.csr_array | FloatArray
    no_in_neighbors: BoolArray

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def storage(self) -> Storage:
        return "sparse" if sparse.issparse(self.matrix) else "dense"

    def matmul(self, X: FloatArray) -> FloatArray:
        if X.shape[0] != self.n:
            raise DimensionMismatch("C @ X", (self.n, *X.shape[1:]), X.shape)
        return np.asarray(self.matrix @ X)

    def row_sums(self) -> FloatArray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def inf_norm(self) -> float:
        return float(np.abs(self.row_sums()).max()) if self.n else 0.0

    def to_dense(self) -> FloatArray:
        if sparse.issparse(self.matrix):
            return np.asarray(self.matrix.toarray())
        return np.asarray(self.matrix)

    def power(self, s: int) -> FloatArray:
        """Dense C^s, for small oracle computations"""
        return np.linalg.matrix_power(self.to_dense(), s)


__all__ = ["GraphSample", "RowStochasticMatrix", "Storage"]
