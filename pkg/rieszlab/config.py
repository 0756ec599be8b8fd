"""Experiment configuration files.

Experiments are INI files with three sections::

    [model]
    d = 2
    s = 0
    potential = quadratic
    potential.k = 1
    beta = 2*log(N)
    N = 128
    seed = 0

    [task]
    step = 0.01

    [output]
    directory = results
    prefix = ginibre
    formats = json,csv

``beta`` is a number or an arithmetic formula in N. Unknown keys are errors.
"""
import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .errors import ConfigError, KernelRangeError, UnsupportedError
from .kernels import RieszKernel
from .potentials import Potential, create_potential
from .sampler import GibbsModel
from .util import eval_formula

#: environment variable holding the default output directory
OUTPUT_ENV = "RIESZLAB_OUTPUT_DIR"

MODEL_KEYS = {"d", "s", "potential", "beta", "n", "seed"}
OUTPUT_KEYS = {"directory", "prefix", "formats"}
FORMATS = {"json", "csv"}

#: task keys understood by each command
TASK_KEYS: Dict[str, set] = {
    "energy": {"points", "theta", "grid", "splitting"},
    "eqmeasure": {"grid", "half_width", "boundary", "c", "tol", "omega"},
    "thermal": {"theta", "grid", "box", "tol", "alpha", "max_iter", "radius"},
    "sample": {"m", "step", "steps", "threads", "method", "tol"},
    "dynamics": {"flow", "t", "step", "integrator", "noise", "record_every"},
    "jellium": {"x", "alpha", "lattice", "tau", "covolume", "grid", "tol", "points"},
    "stats": {
        "sampler",
        "m",
        "threads",
        "center",
        "radius",
        "radii",
        "scale",
        "window",
        "step",
        "steps",
    },
}

#: task keys that must be positive numbers
POSITIVE_KEYS = {"step", "steps", "theta", "grid", "t", "m", "radius", "scale", "tol"}

#: task keys restricted to a half-open interval [low, high)
INTERVAL_KEYS = {"omega": (1.0, 2.0)}


def default_config() -> configparser.ConfigParser:
    config = configparser.ConfigParser()
    config.optionxform = str.lower  # type: ignore[assignment]
    config["model"] = {
        "d": "2",
        "s": "0",
        "potential": "quadratic",
        "potential.k": "1",
        "beta": "2",
        "N": "64",
        "seed": "0",
    }
    config["task"] = {}
    config["output"] = {
        "directory": os.environ.get(OUTPUT_ENV, "."),
        "prefix": "rieszlab",
        "formats": "json,csv",
    }
    return config


def apply_override(config: configparser.ConfigParser, assignment: str) -> None:
    "Apply one ``section.key=value`` override"
    target, sep, value = assignment.partition("=")
    section, dot, key = target.strip().partition(".")
    if not sep or not dot or not key:
        raise ConfigError(
            f"Override {assignment!r} is not of the form section.key=value"
        )
    if section not in ("model", "task", "output"):
        raise ConfigError(f"Unknown config section {section!r}")
    config[section][key.strip()] = value.strip()


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()
) -> configparser.ConfigParser:
    """Defaults, then the file at ``path``, then the overrides in order"""
    config = default_config()
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"Config file {path} not found")
        try:
            config.read(path)
        except configparser.Error as err:
            raise ConfigError(f"Cannot parse {path}: {err}") from err
    for sections in config.sections():
        if sections not in ("model", "task", "output"):
            raise ConfigError(f"Unknown config section [{sections}]")
    for assignment in overrides:
        apply_override(config, assignment)
    return config


def _number(section: str, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}") from None


def _coerce(value: str) -> Any:
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            pass
    return value


@dataclass
class ExperimentConfig:
    "Validated view of an experiment configuration"

    command: str
    d: int
    s: float
    potential_name: str
    potential_params: Dict[str, float]
    beta: Union[str, float]
    N: int
    seed: int
    task: Dict[str, Any] = field(default_factory=dict)
    directory: Path = Path(".")
    prefix: str = "rieszlab"
    formats: List[str] = field(default_factory=lambda: ["json", "csv"])
    #: positional TASK or KIND argument of the command
    action: Optional[str] = None

    @classmethod
    def from_parser(
        cls,
        config: configparser.ConfigParser,
        command: str,
        action: Optional[str] = None,
    ) -> "ExperimentConfig":
        model = config["model"]
        params: Dict[str, float] = {}
        for key, value in model.items():
            if key.startswith("potential."):
                params[key.split(".", 1)[1]] = _number("model", key, value)
            elif key not in MODEL_KEYS:
                raise ConfigError(f"Unknown key model.{key}")
        allowed = TASK_KEYS.get(command)
        if allowed is None:
            raise ConfigError(f"Unknown command {command!r}")
        task: Dict[str, Any] = {}
        for key, value in config["task"].items():
            if key not in allowed:
                raise ConfigError(f"Unknown key task.{key} for {command}")
            task[key] = _coerce(value)
            if key in POSITIVE_KEYS:
                if _number("task", key, value) <= 0:
                    raise ConfigError(f"task.{key} must be positive, got {value}")
            if key in INTERVAL_KEYS:
                low, high = INTERVAL_KEYS[key]
                if not low <= _number("task", key, value) < high:
                    raise ConfigError(
                        f"task.{key} must lie in [{low}, {high}), got {value}"
                    )
        for key in config["output"]:
            if key not in OUTPUT_KEYS:
                raise ConfigError(f"Unknown key output.{key}")
        formats = [f.strip() for f in config["output"]["formats"].split(",") if f]
        if not set(formats) <= FORMATS:
            raise ConfigError(f"Unsupported output formats {formats}")
        N = int(_number("model", "N", model["n"]))
        if N < 1:
            raise ConfigError(f"model.N must be positive, got {N}")
        beta: Union[str, float] = model["beta"]
        try:
            beta = float(beta)
        except ValueError:
            pass
        experiment = cls(
            command,
            int(_number("model", "d", model["d"])),
            _number("model", "s", model["s"]),
            model["potential"],
            params,
            beta,
            N,
            int(_number("model", "seed", model["seed"])),
            task,
            Path(config["output"]["directory"]),
            config["output"]["prefix"],
            formats,
            action,
        )
        experiment.validate()
        return experiment

    def validate(self) -> None:
        try:
            self.kernel()
        except KernelRangeError as err:
            raise ConfigError(str(err)) from err
        try:
            self.potential()
        except UnsupportedError as err:
            raise ConfigError(str(err)) from err
        if self.beta_value() <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")

    def kernel(self) -> RieszKernel:
        return RieszKernel(self.d, self.s)

    def potential(self) -> Potential:
        return create_potential(self.potential_name, **self.potential_params)

    def beta_value(self, N: Optional[int] = None) -> float:
        return eval_formula(self.beta, N=self.N if N is None else N)

    def model(self, N: Optional[int] = None) -> GibbsModel:
        n = self.N if N is None else N
        return GibbsModel(self.kernel(), self.potential(), self.beta_value(n), n)

    def get(self, key: str, default: Any = None) -> Any:
        return self.task.get(key, default)

    def to_dict(self) -> Dict[str, Any]:
        "Echo written into every output file"
        return {
            "command": self.command,
            "action": self.action,
            "model": {
                "d": self.d,
                "s": self.s,
                "potential": {"name": self.potential_name, **self.potential_params},
                "beta": self.beta,
                "N": self.N,
                "seed": self.seed,
            },
            "task": dict(self.task),
            "output": {
                "directory": str(self.directory),
                "prefix": self.prefix,
                "formats": self.formats,
            },
        }
