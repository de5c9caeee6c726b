import os
from collections.abc import Callable, Iterable, Sequence
from typing import Any, TypeVar

from attrs import define, evolve, field
from joblib import Parallel, delayed
from loguru import logger as log

T = TypeVar("T")
U = TypeVar("U")

THREADS_ENV = "OPINION_LAB_THREADS"


def threads_from_env(default: int = 1) -> int:
    """Thread count from ``OPINION_LAB_THREADS``, falling back to ``default``"""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        log.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}")
        return default
    return max(value, 1)


@define
class Runner:
    """A class for keeping track of the worker pool used by the experiments

    The following are accepted as keyword arguments:

        ``seed``: The root seed every random stream is derived from

        ``threads``: Number of workers. ``1`` runs every unit inline in the calling thread.

        ``backend``: joblib backend name, ``"loky"`` (processes) by default. ``"threading"``
        is useful when the work units are dominated by numpy calls that release the GIL.

        ``joblib_args``: A dictionary of additional arguments passed to ``joblib.Parallel``.

    Work units are mapped in submission order and results come back in that same order, so
    any reduction over them is deterministic regardless of ``threads``.
    """

    seed: int = field(default=0)
    threads: int = field(default=1, kw_only=True)
    backend: str = field(default="loky", kw_only=True)
    _joblib_args: dict[str, Any] = field(factory=dict, kw_only=True, alias="joblib_args")
    _pool: Parallel | None = field(default=None, init=False)

    def with_threads(self, threads: int) -> "Runner":
        """Get a new runner matching this one with a different worker count"""
        return evolve(self, threads=max(int(threads), 1))

    def with_seed(self, seed: int) -> "Runner":
        """Get a new runner matching this one with a different root seed"""
        return evolve(self, seed=int(seed))

    def get_pool(self) -> Parallel:
        """Get the underlying joblib.Parallel, constructing a new one if not previously set"""
        if self._pool is None:
            self._pool = Parallel(
                n_jobs=self.threads,
                backend=self.backend,
                **self._joblib_args,
            )
        return self._pool

    def map(self, func: Callable[..., U], units: Iterable[Sequence[Any]]) -> list[U]:
        """Apply ``func(*unit)`` to every unit, preserving order"""
        units = list(units)
        if self.threads == 1 or len(units) <= 1:
            return [func(*unit) for unit in units]

        log.debug(f"Dispatching {len(units)} units to {self.threads} workers")
        return list(self.get_pool()(delayed(func)(*unit) for unit in units))

    def __enter__(self) -> "Runner":
        """Enter a context manager for the underlying pool (keeps workers alive between maps)"""
        self.get_pool().__enter__()
        return self

    def __exit__(self, *args: object, **kwargs: Any) -> None:
        """Exit a context manager for the underlying pool"""
        self.get_pool().__exit__(*args, **kwargs)


__all__ = ["THREADS_ENV", "Runner", "threads_from_env"]
