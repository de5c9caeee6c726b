"""Contains shared error types that can be raised from the simulation functions"""


class OpinionLabError(Exception):
    """Base class for every error raised by this package"""


class SpecError(OpinionLabError, ValueError):
    """Raised when a model specification or an experiment configuration violates its invariants

    Every violation is kept, so a caller can report all of them at once.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)

        lines = "\n".join(f"  {path}: {message}" for path, message in self.violations)
        super().__init__(
            f"{len(self.violations)} invalid setting(s):\n{lines}",
        )

    @classmethod
    def single(cls, path: str, message: str) -> "SpecError":
        return cls([(path, message)])


class DimensionMismatch(OpinionLabError, ValueError):
    """Raised when arrays handed to an operation do not have compatible shapes"""

    def __init__(self, what: str, expected: tuple[int, ...], actual: tuple[int, ...]):
        self.what = what
        self.expected = expected
        self.actual = actual

        super().__init__(f"{what}: expected shape {expected}, got {actual}")


class BudgetExceeded(OpinionLabError, RuntimeError):
    """Raised when a requested computation would exceed a configured size budget"""

    def __init__(self, what: str, expected: float, budget: float):
        self.what = what
        self.expected = expected
        self.budget = budget

        super().__init__(
            f"{what}: expected size {expected:.6g} exceeds the budget of {budget:.6g}",
        )


class BoundsViolation(OpinionLabError, ArithmeticError):
    """Raised when an opinion leaves [-1, 1] beyond the numerical tolerance"""

    def __init__(self, where: str, value: float):
        self.where = where
        self.value = value

        super().__init__(f"{where}: opinion entry {value!r} left [-1, 1]")


class UnknownFunction(OpinionLabError, KeyError):
    """Raised when a test-function id is not part of the built-in family"""

    def __init__(self, name: str):
        self.name = name

        super().__init__(f"Unknown test function {name!r}")

    def __str__(self) -> str:
        return self.args[0]


__all__ = [
    "BoundsViolation",
    "BudgetExceeded",
    "DimensionMismatch",
    "OpinionLabError",
    "SpecError",
    "UnknownFunction",
]
