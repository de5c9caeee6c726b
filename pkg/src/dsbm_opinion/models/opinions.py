import numpy as np
import pandas as pd
from attrs import define, field

from ..types import FloatArray, IntArray

TRAJECTORY_COLUMNS = ["replication", "vertex", "community", "time", "topic", "value"]


@define(frozen=True, eq=False)
class OpinionState:
    """
    Attributes:
        R (FloatArray): n x ell expressed opinions
        k (int): time index
    """

    R: FloatArray
    k: int = 0

    @property
    def n(self) -> int:
        return int(self.R.shape[0])

    @property
    def ell(self) -> int:
        return int(self.R.shape[1])


@define(frozen=True, eq=False)
class SignalFrame:
    """External signals of one step

    Attributes:
        W (FloatArray): n x ell signals entering the recursion
        Z (FloatArray): n x ell media draws behind W
        k (int): the step these signals feed into
    """

    W: FloatArray
    Z: FloatArray
    k: int = 1


@define(eq=False)
class TrajectoryRecord:
    """Stored trajectories V_{k,i} of a set of selected vertices

    ``values[m]`` is the ell x (k + 1) matrix of vertex ``vertices[m]``; its column ``t``
    is the opinion at time ``t``.

    Attributes:
        vertices (IntArray): selected vertex ids
        communities (IntArray): their 0-based communities
        values (FloatArray): shape (len(vertices), ell, k + 1)
    """

    vertices: IntArray
    communities: IntArray
    values: FloatArray = field()

    @classmethod
    def empty(cls, vertices: IntArray, communities: IntArray, ell: int, k_max: int) -> "TrajectoryRecord":
        return cls(
            vertices=np.asarray(vertices, dtype=np.int64),
            communities=np.asarray(communities, dtype=np.int64),
            values=np.zeros((len(vertices), ell, k_max + 1)),
        )

    @property
    def k(self) -> int:
        return int(self.values.shape[2]) - 1

    def record(self, state: OpinionState) -> None:
        if len(self.vertices):
            self.values[:, :, state.k] = state.R[self.vertices]

    def V(self, vertex: int) -> FloatArray:
        """ell x (k + 1) trajectory matrix of one selected vertex"""
        (where,) = np.flatnonzero(self.vertices == vertex)
        return self.values[where]

    def to_frame(self, replication: int = 0) -> pd.DataFrame:
        m, ell, times = self.values.shape
        vertex, topic, time = np.meshgrid(
            np.arange(m),
            np.arange(ell),
            np.arange(times),
            indexing="ij",
        )
        return pd.DataFrame(
            {
                "replication": np.full(self.values.size, replication, dtype=np.int64),
                "vertex": self.vertices[vertex.ravel()],
                "community": self.communities[vertex.ravel()],
                "time": time.ravel(),
                "topic": topic.ravel(),
                "value": self.values.ravel(),
            },
            columns=TRAJECTORY_COLUMNS,
        )


__all__ = ["TRAJECTORY_COLUMNS", "OpinionState", "SignalFrame", "TrajectoryRecord"]
