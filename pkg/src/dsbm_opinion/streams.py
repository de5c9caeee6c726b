"""Seeded random streams.

One root seed drives everything. A stream is addressed by a counter key

    (outer, inner, purpose, extra)

where ``outer`` indexes label draws, ``inner`` replications within a label draw,
``purpose`` one of :class:`Purpose` and ``extra`` a purpose-specific counter
(e.g. the topic or a chunk number). The key is handed to
:class:`numpy.random.SeedSequence` as its ``spawn_key``, so each stream is
independent of every other and reproducible on its own: the graph of replication 3
can be regenerated without replaying replications 0-2.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    LABELS = 0
    EDGES = 1
    WEIGHTS = 2
    BELIEFS = 3
    SIGNALS = 4
    INITIAL = 5
    TREE = 6
    STATIONARY = 7
    CONCENTRATION = 8
    CHAOS_LIMIT = 9


def seed_sequence(
    root_seed: int,
    purpose: Purpose,
    *,
    outer: int = 0,
    inner: int = 0,
    extra: int = 0,
) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(root_seed),
        spawn_key=(int(outer), int(inner), int(purpose), int(extra)),
    )


def generator(
    root_seed: int,
    purpose: Purpose,
    *,
    outer: int = 0,
    inner: int = 0,
    extra: int = 0,
) -> np.random.Generator:
    """Independent generator for one (outer, inner, purpose, extra) address"""
    return np.random.default_rng(
        seed_sequence(root_seed, purpose, outer=outer, inner=inner, extra=extra),
    )


__all__ = ["Purpose", "generator", "seed_sequence"]
