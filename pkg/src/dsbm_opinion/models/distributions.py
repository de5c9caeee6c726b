"""Closed family of distribution descriptors.

Weights G_{r,s}, beliefs F_r, media signals nu and the initial law all use the same
small family: point mass, uniform(lo, hi), Beta(a, b) rescaled to [lo, hi] and finite
mixtures of those. Every member has a closed-form mean and second moment.
"""

from typing import Any, TypeAlias, TypeVar

import numpy as np
from attrs import define, field
from scipy import stats

from ..errors import SpecError
from ..types import FloatArray

T = TypeVar("T", bound="VectorLaw")


@define(frozen=True)
class PointMass:
    """
    Attributes:
        value (float): the atom
    """

    value: float = field(converter=float)

    def mean(self) -> float:
        return self.value

    def second_moment(self) -> float:
        return self.value**2

    def support(self) -> tuple[float, float]:
        return self.value, self.value

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> FloatArray:
        return np.full(size, self.value, dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "point", "value": self.value}


@define(frozen=True)
class Uniform:
    """
    Attributes:
        lo (float): lower end of the support
        hi (float): upper end of the support
    """

    lo: float = field(converter=float)
    hi: float = field(converter=float)

    def mean(self) -> float:
        return (self.lo + self.hi) / 2

    def second_moment(self) -> float:
        return (self.lo**2 + self.lo * self.hi + self.hi**2) / 3

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> FloatArray:
        return rng.uniform(self.lo, self.hi, size=size)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@define(frozen=True)
class ScaledBeta:
    """
    Attributes:
        a (float): first shape parameter
        b (float): second shape parameter
        lo (float): lower end of the support
        hi (float): upper end of the support
    """

    a: float = field(converter=float)
    b: float = field(converter=float)
    lo: float = field(default=0.0, converter=float)
    hi: float = field(default=1.0, converter=float)

    def frozen(self) -> Any:
        return stats.beta(self.a, self.b, loc=self.lo, scale=self.hi - self.lo)

    def mean(self) -> float:
        return float(self.frozen().mean())

    def second_moment(self) -> float:
        return float(self.frozen().moment(2))

    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> FloatArray:
        return self.lo + (self.hi - self.lo) * rng.beta(self.a, self.b, size=size)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "beta", "a": self.a, "b": self.b, "lo": self.lo, "hi": self.hi}


@define(frozen=True)
class Mixture:
    """
    Attributes:
        weights (tuple[float, ...]): mixing probabilities, summing to one
        components (tuple[ScalarDistribution, ...]): the mixed descriptors
    """

    weights: tuple[float, ...] = field(converter=lambda w: tuple(float(x) for x in w))
    components: tuple["ScalarDistribution", ...] = field(converter=tuple)

    def mean(self) -> float:
        return float(sum(w * c.mean() for w, c in zip(self.weights, self.components)))

    def second_moment(self) -> float:
        return float(
            sum(w * c.second_moment() for w, c in zip(self.weights, self.components)),
        )

    def support(self) -> tuple[float, float]:
        lows, highs = zip(*(c.support() for c in self.components))
        return min(lows), max(highs)

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> FloatArray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        which = rng.choice(len(self.components), size=shape, p=np.asarray(self.weights))
        out = np.empty(shape, dtype=float)
        for idx, component in enumerate(self.components):
            mask = which == idx
            count = int(mask.sum())
            if count:
                out[mask] = component.sample(rng, count)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "mixture",
            "weights": list(self.weights),
            "components": [c.to_dict() for c in self.components],
        }


ScalarDistribution: TypeAlias = PointMass | Uniform | ScaledBeta | Mixture


def scalar_from_dict(src: Any, path: str = "") -> ScalarDistribution:
    """Parse a descriptor; a bare number is a point mass"""
    if isinstance(src, bool):
        raise SpecError.single(path, "expected a number or a distribution table")
    if isinstance(src, int | float):
        return PointMass(src)
    if not isinstance(src, dict):
        raise SpecError.single(path, "expected a number or a distribution table")

    d = dict(src)
    kind = d.pop("kind", None)
    try:
        if kind == "point":
            return PointMass(d.pop("value"))
        if kind == "uniform":
            return Uniform(d.pop("lo"), d.pop("hi"))
        if kind == "beta":
            return ScaledBeta(d.pop("a"), d.pop("b"), d.pop("lo", 0.0), d.pop("hi", 1.0))
        if kind == "mixture":
            weights = d.pop("weights")
            components = [
                scalar_from_dict(c, f"{path}.components[{i}]")
                for i, c in enumerate(d.pop("components"))
            ]
            return Mixture(weights, components)
    except KeyError as exc:
        raise SpecError.single(path, f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise SpecError.single(path, f"bad value ({exc})") from exc

    raise SpecError.single(
        path,
        f"unknown distribution kind {kind!r}; expected point, uniform, beta or mixture",
    )


def scalar_violations(dist: ScalarDistribution, path: str, lo: float, hi: float) -> list[tuple[str, str]]:
    """Invariant violations of one descriptor against the allowed support [lo, hi]"""
    out: list[tuple[str, str]] = []
    if isinstance(dist, Uniform) and not dist.lo <= dist.hi:
        out.append((path, f"uniform needs lo <= hi, got ({dist.lo}, {dist.hi})"))
    if isinstance(dist, ScaledBeta):
        if dist.a <= 0 or dist.b <= 0:
            out.append((path, "beta shape parameters must be positive"))
        if not dist.lo < dist.hi:
            out.append((path, f"beta needs lo < hi, got ({dist.lo}, {dist.hi})"))
    if isinstance(dist, Mixture):
        w = np.asarray(dist.weights)
        if len(dist.weights) != len(dist.components) or len(w) == 0:
            out.append((path, "mixture needs one weight per component"))
        elif np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-9):
            out.append((path, "mixture weights must be nonnegative and sum to 1"))
        for i, c in enumerate(dist.components):
            out.extend(scalar_violations(c, f"{path}.components[{i}]", lo, hi))
    low, high = dist.support()
    if low < lo - 1e-12 or high > hi + 1e-12:
        out.append((path, f"support [{low}, {high}] is not inside [{lo}, {hi}]"))
    return out


@define(frozen=True)
class VectorLaw:
    """Law on [-1, 1]^ell with independent components

    Attributes:
        components (tuple[ScalarDistribution, ...]): one descriptor per topic
    """

    components: tuple[ScalarDistribution, ...] = field(converter=tuple)

    @property
    def ell(self) -> int:
        return len(self.components)

    def mean(self) -> FloatArray:
        return np.array([c.mean() for c in self.components], dtype=float)

    def sample(self, rng: np.random.Generator, size: int) -> FloatArray:
        """Draw ``size`` vectors, shape (size, ell)"""
        out = np.empty((size, self.ell), dtype=float)
        for topic, component in enumerate(self.components):
            out[:, topic] = component.sample(rng, size)
        return out

    def violations(self, path: str) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        for topic, c in enumerate(self.components):
            out.extend(scalar_violations(c, f"{path}[{topic}]", -1.0, 1.0))
        return out

    def to_dict(self) -> list[dict[str, Any]]:
        return [c.to_dict() for c in self.components]

    @classmethod
    def from_dict(cls: type[T], src: Any, ell: int, path: str = "") -> T:
        """A single descriptor is broadcast over the ell topics; a list gives one per topic"""
        if isinstance(src, list):
            if len(src) != ell:
                raise SpecError.single(path, f"expected {ell} component laws, got {len(src)}")
            return cls([scalar_from_dict(c, f"{path}[{i}]") for i, c in enumerate(src)])
        dist = scalar_from_dict(src, path)
        return cls([dist] * ell)


__all__ = [
    "Mixture",
    "PointMass",
    "ScalarDistribution",
    "ScaledBeta",
    "Uniform",
    "VectorLaw",
    "scalar_from_dict",
    "scalar_violations",
]
