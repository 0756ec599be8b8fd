import math
from pathlib import Path
from typing import List

import pytest

from rieszlab.config import (
    OUTPUT_ENV,
    ExperimentConfig,
    apply_override,
    default_config,
    load_config,
)
from rieszlab.errors import ConfigError
from rieszlab.potentials import QuadraticPotential


def experiment(command: str = "energy", *overrides: str) -> ExperimentConfig:
    return ExperimentConfig.from_parser(load_config(overrides=overrides), command)


def test_defaults() -> None:
    exp = experiment()
    assert (exp.d, exp.s, exp.N, exp.seed) == (2, 0.0, 64, 0)
    assert exp.beta_value() == 2.0
    assert isinstance(exp.potential(), QuadraticPotential)
    assert exp.formats == ["json", "csv"]
    assert exp.prefix == "rieszlab"
    model = exp.model()
    assert model.theta == pytest.approx(128.0)


def test_output_directory_from_environment(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert default_config()["output"]["directory"] == str(tmp_path)
    assert experiment().directory == tmp_path


def test_file_then_overrides(tmp_path: Path) -> None:
    path = tmp_path / "ginibre.ini"
    path.write_text(
        "[model]\nN = 128\nbeta = 2*log(N)\npotential.k = 4\n\n"
        "[task]\nsplitting = true\n\n[output]\nprefix = ginibre\n"
    )
    parser = load_config(path, ["model.N=10", "task.theta=5"])
    exp = ExperimentConfig.from_parser(parser, "energy")
    assert exp.N == 10
    assert exp.beta_value() == pytest.approx(2 * math.log(10))
    assert exp.beta_value(100) == pytest.approx(2 * math.log(100))
    assert exp.potential_params == {"k": 4.0}
    assert exp.get("theta") == 5
    assert exp.get("splitting") == "true"
    assert exp.prefix == "ginibre"
    echoed = exp.to_dict()
    assert echoed["model"]["beta"] == "2*log(N)"
    assert echoed["model"]["potential"] == {"name": "quadratic", "k": 4.0}
    assert echoed["task"] == {"splitting": "true", "theta": 5}


def test_bad_files(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    path = tmp_path / "extra.ini"
    path.write_text("[plots]\ncolor = red\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("no section header\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_overrides() -> None:
    config = default_config()
    apply_override(config, " model.seed = 7 ")
    assert config["model"]["seed"] == "7"
    for bad in ("model.seed", "seed=7", "plots.color=red", "model.=1"):
        with pytest.raises(ConfigError):
            apply_override(config, bad)


@pytest.mark.parametrize(
    "command,overrides",
    [
        ("energy", ["model.color=red"]),
        ("energy", ["task.grid_size=4"]),
        ("energy", ["output.colour=red"]),
        ("thermal", ["task.theta=-1"]),
        ("sample", ["task.m=0"]),
        ("energy", ["model.N=0"]),
        ("energy", ["model.d=abc"]),
        ("energy", ["output.formats=json,hdf5"]),
        ("energy", ["model.s=2"]),
        ("energy", ["model.d=2", "model.s=-1"]),
        ("energy", ["model.potential=wobbly"]),
        ("energy", ["model.beta=-1"]),
        ("plot", []),
    ],
)
def test_rejects(command: str, overrides: List[str]) -> None:
    with pytest.raises(ConfigError):
        experiment(command, *overrides)


def test_action_is_echoed() -> None:
    parser = load_config(overrides=["task.lattice=triangular"])
    exp = ExperimentConfig.from_parser(parser, "jellium", "W")
    assert exp.to_dict()["action"] == "W"
    assert exp.to_dict()["command"] == "jellium"
