"""Experiment orchestration and persistence.

``run`` executes the experiment named by the configuration (or an explicit ``kind``),
writes its CSV tables to the output directory and finishes with ``manifest.json``.
Every file except the manifest is a deterministic function of the configuration.
"""

import hashlib
import json
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Literal

import pandas as pd
from attrs import define, field
from importlib_metadata import PackageNotFoundError, version
from loguru import logger as log

from dsbm_opinion.dynamics import write_trajectories
from dsbm_opinion.graph import dump_graph
from dsbm_opinion.metrics import write_csv
from dsbm_opinion.models.reports import TREE_COLUMNS

from .config import EXPERIMENT_KINDS, ExperimentConfig, ExperimentKind, dump_config
from .interface import OpinionLab

VERSIONED_PACKAGES = ("dsbm-opinion-lab", "numpy", "scipy", "pandas", "joblib", "attrs")
MANIFEST = "manifest.json"


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form"""
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()


def package_versions() -> dict[str, str]:
    out = {}
    for name in VERSIONED_PACKAGES:
        try:
            out[name] = version(name)
        except PackageNotFoundError:
            out[name] = "unknown"
    return out


@define
class RunSummary:
    """
    Attributes:
        kind (str): experiment that ran
        out (Path): output directory
        files (list[str]): files written, relative to ``out``
        manifest (dict[str, Any]): the content of manifest.json
    """

    kind: str
    out: Path
    files: list[str] = field(factory=list)
    manifest: dict[str, Any] = field(factory=dict)

    def paths(self) -> list[Path]:
        return [self.out / f for f in self.files]


@define
class _Writer:
    out: Path
    files: list[str] = field(factory=list)

    def csv(self, name: str, frame: pd.DataFrame) -> None:
        write_csv(frame, self.out / name)
        self.files.append(name)
        log.info(f"Wrote {self.out / name} ({len(frame)} rows)")

    def json(self, name: str, payload: Any) -> None:
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.files.append(name)
        log.info(f"Wrote {path}")

    def track(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name


def _simulate(lab: OpinionLab, writer: _Writer) -> None:
    for n in lab.config.n_grid:
        dump_graph(lab.graph(n), writer.track(f"graph_n{n}.txt"))
        write_trajectories(lab.trajectories(n), writer.track(f"trajectories_n{n}.csv"))


def _meanfield(lab: OpinionLab, writer: _Writer) -> None:
    writer.json("model.json", {"points": [lab.model_report(n) for n in lab.config.n_grid]})


def _error(lab: OpinionLab, writer: _Writer) -> None:
    writer.csv("error_curve.csv", lab.error_curve())
    writer.csv("error_sup.csv", lab.error_sup())
    writer.csv("rate_fit.csv", lab.rate_fits())
    writer.csv("one_step.csv", pd.concat([lab.one_step(n) for n in lab.config.n_grid], ignore_index=True))


def _chaos(lab: OpinionLab, writer: _Writer) -> None:
    writer.csv("chaos.csv", pd.concat([lab.chaos(n) for n in lab.config.n_grid], ignore_index=True))


def _stationary(lab: OpinionLab, writer: _Writer) -> None:
    writer.csv("stationarity.csv", pd.concat([lab.stationarity(n) for n in lab.config.n_grid], ignore_index=True))


def _concentration(lab: OpinionLab, writer: _Writer) -> None:
    writer.csv("concentration.csv", lab.concentration())


def _tree(lab: OpinionLab, writer: _Writer) -> None:
    rows = [lab.tree_likeness(n, as_pandas=False).to_dict() for n in lab.config.n_grid]
    writer.csv("tree.csv", pd.DataFrame(rows, columns=TREE_COLUMNS))
    writer.csv("a_s.csv", lab.a_s())
    writer.csv("a_s_fit.csv", lab.a_s_slopes())


EXPERIMENTS = {
    "simulate": _simulate,
    "meanfield": _meanfield,
    "error": _error,
    "chaos": _chaos,
    "stationary": _stationary,
    "concentration": _concentration,
    "tree": _tree,
}


def run(config: ExperimentConfig, kind: ExperimentKind | None = None, *, lab: OpinionLab | None = None) -> RunSummary:
    """Run one experiment and persist its tables and manifest

    ``kind`` defaults to the configured experiment. I/O failures surface as
    ``OSError`` carrying the offending path.
    """
    kind = kind or config.kind
    if kind not in EXPERIMENTS:
        raise ValueError(f"Unknown experiment {kind!r}; expected one of {', '.join(EXPERIMENT_KINDS)}")
    lab = lab or OpinionLab(config)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    writer = _Writer(out)

    log.info(f"Running {kind} with seed {config.seed} into {out}")
    started = time.perf_counter()
    EXPERIMENTS[kind](lab, writer)
    wall_time = time.perf_counter() - started

    manifest = {
        "kind": kind,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "threads": config.threads,
        "versions": package_versions(),
        "wall_time_s": wall_time,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "files": list(writer.files),
    }
    writer.json(MANIFEST, manifest)
    log.info(f"{kind} finished in {wall_time:.1f} s")
    return RunSummary(kind=kind, out=out, files=writer.files, manifest=manifest)


__all__ = ["EXPERIMENTS", "MANIFEST", "RunSummary", "config_hash", "package_versions", "run"]
