from typing import Any, Literal

import numpy as np
from attrs import define, field

from ..types import UNSET, FloatArray, IntArray, Unset

TrajectoryKind = Literal["meanfield", "intermediate"]


def _optional(value: Unset | float | bool) -> Any:
    return None if isinstance(value, Unset) else value


@define(frozen=True, eq=False)
class RegimeStats:
    """Regime statistics of one (n, theta) point

    ``Delta``, ``Lambda`` and the threshold flag are ``UNSET`` when no row of M is
    nonzero.

    Attributes:
        n (int): vertex count
        theta (float): density parameter
        mu (FloatArray): mu_r = sum_s beta_rs pi_hat_s kappa(s, r)
        nu (FloatArray): nu_r = sum_s v_rs pi_hat_s kappa(s, r)
        Delta (Unset | float): max over nonzero rows of nu_r / mu_r^2
        Lambda (Unset | float): max over nonzero rows of mu_r / nu_r
        E_n (float): max_rs |pi_hat_s pi_r - pi_s pi_hat_r| / (pi_hat_r pi_s)
        threshold (Unset | float): (6 H Lambda)^2 Delta log n
        dense_threshold_ok (Unset | bool): theta >= threshold
        clipping_active (bool): max kappa theta / n > 1
    """

    n: int
    theta: float
    mu: FloatArray
    nu: FloatArray
    Delta: Unset | float = UNSET
    Lambda: Unset | float = UNSET
    E_n: float = 0.0
    threshold: Unset | float = UNSET
    dense_threshold_ok: Unset | bool = UNSET
    clipping_active: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "theta": self.theta,
            "mu": self.mu.tolist(),
            "nu": self.nu.tolist(),
            "Delta": _optional(self.Delta),
            "Lambda": _optional(self.Lambda),
            "E_n": self.E_n,
            "threshold": _optional(self.threshold),
            "dense_threshold_ok": _optional(self.dense_threshold_ok),
            "clipping_active": self.clipping_active,
        }


@define(frozen=True, eq=False)
class MeanFieldModel:
    """Averaged K x K description of one (n, theta) point

    Attributes:
        M (FloatArray): limit matrix built from pi
        M_breve (FloatArray): finite-n matrix built from pi_hat
        beta (FloatArray): weight means
        v (FloatArray): weight second moments
        W_bar (FloatArray): K x ell conditional signal means
        R_bar (FloatArray): K x ell conditional initial means
        nonzero_rows (IntArray): communities whose row of M is nonzero
        c (float): network weight
        d (float): signal weight
        regime (RegimeStats | None): regime statistics, when computed
        p_no_in_neighbors (FloatArray): P(d_i^- = 0 | J_i = r)
    """

    M: FloatArray
    M_breve: FloatArray
    beta: FloatArray
    v: FloatArray
    W_bar: FloatArray
    R_bar: FloatArray
    nonzero_rows: IntArray
    c: float
    d: float
    regime: RegimeStats | None = None
    p_no_in_neighbors: FloatArray = field(factory=lambda: np.zeros(0))

    @property
    def K(self) -> int:
        return int(self.M.shape[0])

    @property
    def ell(self) -> int:
        return int(self.W_bar.shape[1])

    def matrix(self, kind: TrajectoryKind = "meanfield") -> FloatArray:
        return self.M_breve if kind == "intermediate" else self.M

    def to_dict(self) -> dict[str, Any]:
        field_dict: dict[str, Any] = {
            "M": self.M.tolist(),
            "M_breve": self.M_breve.tolist(),
            "beta": self.beta.tolist(),
            "v": self.v.tolist(),
            "W_bar": self.W_bar.tolist(),
            "R_bar": self.R_bar.tolist(),
            "nonzero_rows": self.nonzero_rows.tolist(),
            "p_no_in_neighbors": self.p_no_in_neighbors.tolist(),
            "c": self.c,
            "d": self.d,
        }
        if self.regime is not None:
            field_dict["regime"] = self.regime.to_dict()
        return field_dict


@define(frozen=True, eq=False)
class MeanFieldTrajectory:
    """Mean-field or intermediate opinions of a set of vertices

    Attributes:
        vertices (IntArray): vertex ids
        communities (IntArray): their 0-based communities
        values (FloatArray): shape (len(vertices), ell, k_max + 1)
        kind (TrajectoryKind): which averaged matrix drove the construction
    """

    vertices: IntArray
    communities: IntArray
    values: FloatArray
    kind: TrajectoryKind = "meanfield"

    @property
    def k_max(self) -> int:
        return int(self.values.shape[2]) - 1

    def at(self, k: int) -> FloatArray:
        """len(vertices) x ell opinions at time k"""
        return self.values[:, :, k]


__all__ = ["MeanFieldModel", "MeanFieldTrajectory", "RegimeStats", "TrajectoryKind"]
