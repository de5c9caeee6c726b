import json

import pytest
from loguru import logger as log

from opinion_lab import parse_config, run
from opinion_lab.cli import EXIT_CONFIG, EXIT_OK, main
from opinion_lab.harness import MANIFEST, config_hash

CONFIG = """
seed = 3
threads = 1

[model]
K = 2
pi = [0.5, 0.5]
kappa = [[1.0, 0.5], [0.5, 1.0]]
c = 0.5
d = 0.3
weights = { kind = "uniform", lo = 0.0, hi = 1.0 }
signals = [0.5, -0.5]

[experiment]
kind = "error"
n_grid = [30, 60]
theta_rule = "const:5"
inner = 2
outer = 1
k_max = 3
"""


@pytest.fixture(autouse=True)
def quiet_logging():
    yield
    log.remove()
    log.disable("dsbm_opinion")
    log.disable("opinion_lab")


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG, encoding="utf-8")
    return path


def test_outputs_are_reproducible(tmp_path):
    config = parse_config(CONFIG)
    first = run(config.with_out(str(tmp_path / "a")))
    second = run(config.with_out(str(tmp_path / "b")))

    assert first.files == second.files
    assert first.files[-1] == MANIFEST
    for name in first.files[:-1]:
        assert (first.out / name).read_bytes() == (second.out / name).read_bytes(), name


def test_manifest(tmp_path):
    config = parse_config(CONFIG).with_out(str(tmp_path))
    summary = run(config)

    manifest = json.loads((tmp_path / MANIFEST).read_text(encoding="utf-8"))
    assert manifest["kind"] == "error"
    assert manifest["seed"] == 3
    assert manifest["config_hash"] == config_hash(config)
    assert set(manifest["files"]) == {"error_curve.csv", "error_sup.csv", "rate_fit.csv", "one_step.csv"}
    assert "numpy" in manifest["versions"]
    assert all(path.exists() for path in summary.paths())


def test_hash_tracks_the_configuration():
    config = parse_config(CONFIG)
    assert config_hash(config) == config_hash(parse_config(CONFIG))
    assert config_hash(config) != config_hash(config.with_seed(4))


def test_explicit_kind(tmp_path):
    summary = run(parse_config(CONFIG).with_out(str(tmp_path)), "simulate")
    assert summary.files == [
        "graph_n30.txt",
        "trajectories_n30.csv",
        "graph_n60.txt",
        "trajectories_n60.csv",
        MANIFEST,
    ]
    assert (tmp_path / "graph_n30.txt").read_text(encoding="utf-8").startswith("30 2\n")


def test_unknown_kind(tmp_path):
    with pytest.raises(ValueError, match="Unknown experiment"):
        run(parse_config(CONFIG).with_out(str(tmp_path)), "forecast")


def test_cli_validate(config_file, capsys):
    assert main(["validate", "--config", str(config_file)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{config_file}: ok"


def test_cli_reports_bad_configurations(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(CONFIG.replace("d = 0.3", "d = 1.5"), encoding="utf-8")
    assert main(["validate", "--config", str(path)]) == EXIT_CONFIG


def test_cli_overrides(config_file, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("OPINION_LAB_THREADS", "2")
    out = tmp_path / "meanfield"
    assert main(["meanfield", "--config", str(config_file), "--out", str(out), "--seed", "9"]) == EXIT_OK

    manifest = json.loads((out / MANIFEST).read_text(encoding="utf-8"))
    assert manifest["seed"] == 9
    assert manifest["threads"] == 2
    report = json.loads((out / "model.json").read_text(encoding="utf-8"))
    assert [point["regime"]["n"] for point in report["points"]] == [30, 60]
    assert str(out / MANIFEST) in capsys.readouterr().out
