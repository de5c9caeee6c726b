"""Contains some shared types for properties"""

from typing import Any, Literal, TypeAlias

import numpy as np
import numpy.typing as npt
from attrs import define

FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int64]
BoolArray: TypeAlias = npt.NDArray[np.bool_]


class Unset:
    def __bool__(self) -> Literal[False]:
        return False

    def __repr__(self) -> str:
        return "UNSET"


UNSET: Unset = Unset()


@define(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its standard error"""

    value: float
    stderr: float
    reps: int

    @classmethod
    def from_samples(cls, samples: npt.ArrayLike) -> "Estimate":
        """Sample mean and standard error of the mean (ddof=1, zero for a single sample)"""
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            return cls(value=float("nan"), stderr=float("nan"), reps=0)
        stderr = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(value=float(x.mean()), stderr=stderr, reps=int(x.size))

    def to_dict(self) -> dict[str, Any]:
        return {"estimate": self.value, "stderr": self.stderr, "reps": self.reps}


def combined_stderr(*errors: float) -> float:
    """Standard error of a difference/sum of independent estimates"""
    return float(np.sqrt(np.sum(np.square(errors))))


__all__ = [
    "UNSET",
    "BoolArray",
    "Estimate",
    "FloatArray",
    "IntArray",
    "Unset",
    "combined_stderr",
]
