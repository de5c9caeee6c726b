"""Small model specifications shared by the tests"""

import numpy as np

from dsbm_opinion.models import ModelSpec


def two_community_spec(**overrides) -> ModelSpec:
    table = {
        "K": 2,
        "pi": [0.5, 0.5],
        "kappa": [[1.0, 0.5], [0.5, 1.0]],
        "ell": 2,
        "c": 0.5,
        "d": 0.3,
        "H": 1.0,
        "weights": {"kind": "uniform", "lo": 0.0, "hi": 1.0},
        "beliefs": {"kind": "uniform", "lo": -1.0, "hi": 1.0},
        "signals": [
            [{"kind": "uniform", "lo": 0.0, "hi": 1.0}, 0.5],
            [{"kind": "uniform", "lo": -1.0, "hi": 0.0}, -0.5],
        ],
    }
    table.update(overrides)
    return ModelSpec.from_dict(table)


def single_community_spec(**overrides) -> ModelSpec:
    table = {"K": 1, "kappa": [[1.0]], "c": 0.5, "d": 0.3}
    table.update(overrides)
    return ModelSpec.from_dict(table)


def random_spec(rng: np.random.Generator, K: int = 3, ell: int = 2) -> ModelSpec:
    lo = rng.uniform(0.0, 0.5, size=(K, K))
    return ModelSpec.from_dict(
        {
            "K": K,
            "pi": rng.dirichlet(np.full(K, 5.0)).tolist(),
            "kappa": rng.uniform(0.2, 2.0, size=(K, K)).tolist(),
            "ell": ell,
            "c": float(rng.uniform(0.1, 0.6)),
            "d": float(rng.uniform(0.1, 0.35)),
            "weights": [[{"kind": "uniform", "lo": lo[r, s], "hi": lo[r, s] + 0.5} for s in range(K)] for r in range(K)],
            "beliefs": {"kind": "uniform", "lo": -1.0, "hi": 1.0},
            "signals": {"kind": "uniform", "lo": -0.5, "hi": 1.0},
            "initial": "beliefs",
        },
    )
