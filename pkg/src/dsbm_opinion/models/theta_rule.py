import math
from typing import Literal

from attrs import define, field

from ..errors import SpecError

RuleKind = Literal["const", "log", "loglog", "pow", "linear"]
RULE_KINDS: tuple[str, ...] = ("const", "log", "loglog", "pow", "linear")


@define(frozen=True)
class ThetaRule:
    """Density parameter as a function of n

    ``const:x`` gives x, ``log:x`` gives x log n, ``loglog:x`` gives x log log n,
    ``pow:a`` gives n^a and ``linear:x`` gives x n.
    """

    kind: RuleKind
    x: float = field(converter=float)

    def __call__(self, n: int) -> float:
        if self.kind == "const":
            return self.x
        if self.kind == "log":
            return self.x * math.log(n)
        if self.kind == "loglog":
            return self.x * math.log(math.log(n)) if n > math.e else 0.0
        if self.kind == "pow":
            return float(n) ** self.x
        return self.x * n

    def violations(self, n_grid: list[int], path: str = "theta_rule") -> list[tuple[str, str]]:
        """Grid points where the rule does not give a positive theta"""
        return [(path, f"theta({n}) = {self(n):.6g} is not positive") for n in n_grid if not self(n) > 0]

    def __str__(self) -> str:
        return f"{self.kind}:{self.x!r}"

    @classmethod
    def parse(cls, text: str, path: str = "theta_rule") -> "ThetaRule":
        kind, sep, raw = str(text).strip().partition(":")
        if kind not in RULE_KINDS or not sep:
            raise SpecError.single(path, f"expected one of {', '.join(k + ':x' for k in RULE_KINDS)}, got {text!r}")
        try:
            x = float(raw)
        except ValueError:
            raise SpecError.single(path, f"{raw!r} is not a number") from None
        return cls(kind=kind, x=x)  # type: ignore[arg-type]


__all__ = ["RULE_KINDS", "ThetaRule"]
