"""Console script for rieszlab."""
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import pandas as pd

from .config import ExperimentConfig, load_config
from .density import Density, GriddedDensity
from .dynamics import FLOWS, INTEGRATORS, meanfield_track
from .equilibrium import EquilibriumResult, analytic_equilibrium, zeta
from .errors import AcceptanceError, ConfigError, RieszLabError, UnsupportedError
from .jellium import (
    Lattice,
    TorusConfig,
    W_gradient,
    W_periodic,
    green_1d_log,
    green_periodic,
    kronecker_madelung,
    lattice_scan_2d,
    madelung,
    optimize_torus,
)
from .kernels import coulomb_constant
from .modenergy import (
    Configuration,
    blowup_scaling_residual,
    hamiltonian,
    modulated_energy,
    splitting_residual,
    thermal_splitting_residual,
)
from .obstacle import BOUNDARY_DATA, obstacle_solve
from .potentials import RadialPotential
from .reports import _plain
from .sampler import SAMPLERS, SampleEnsemble, iid_sample, minimize_energy
from .statistics import (
    bump,
    clt_harness,
    discrepancy,
    fluct,
    local_field,
    number_variance_curve,
    pair_count,
    predicted_variance,
)
from .thermal import expansion_iterate, interior_deviation, thermal_equilibrium
from .util import FLOAT_FORMAT, make_rng, version_stamp

logger = logging.getLogger(__name__)

EQMEASURE_TASKS = ("analytic", "el", "obstacle")
JELLIUM_TASKS = ("green", "madelung", "W", "scan", "optimize")
STATS_TASKS = ("fluct", "clt", "numbervar", "discrepancy", "localfield")


@dataclass
class Outcome:
    "Everything one command produced"

    results: Dict[str, Any]
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    configurations: Dict[str, Configuration] = field(default_factory=dict)
    densities: Dict[str, GriddedDensity] = field(default_factory=dict)
    #: acceptance checks by name
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def failed(self) -> List[str]:
        return [name for name, passed in self.checks.items() if not passed]


@dataclass
class Session:
    "Options shared by all commands"

    config_path: Optional[str]
    overrides: List[str]
    threads: int
    check: bool


def _flag(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


def _floats(value: Any) -> np.ndarray:
    "Parse '0.1,0.2' or a single number"
    if isinstance(value, str):
        try:
            return np.array([float(v) for v in value.split(",") if v.strip()])
        except ValueError:
            raise ConfigError(
                f"Expected comma-separated numbers, got {value!r}"
            ) from None
    return np.atleast_1d(np.asarray(value, dtype=float))


def _point(value: Any, d: int) -> np.ndarray:
    x = _floats(value)
    if x.size == 1:
        x = np.full(d, float(x[0]))
    if x.size != d:
        raise ConfigError(f"Expected a point in dimension {d}, got {value!r}")
    return x


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


def _equilibrium(experiment: ExperimentConfig) -> EquilibriumResult:
    return analytic_equilibrium(experiment.potential(), experiment.kernel())


def _points_table(configurations: Sequence[Configuration]) -> pd.DataFrame:
    frames = []
    for i, X in enumerate(configurations):
        frame = pd.DataFrame(X.points, columns=[f"x{k}" for k in range(X.d)])
        frame.insert(0, "sample", i)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def run_energy(experiment: ExperimentConfig, threads: int) -> Outcome:
    V, kernel = experiment.potential(), experiment.kernel()
    equilibrium = analytic_equilibrium(V, kernel)
    mu = equilibrium.density
    path = experiment.get("points")
    if path is not None:
        X = Configuration.from_csv(path)
        if X.d != kernel.d:
            raise ConfigError(f"{path} holds {X.d}D points, the model is {kernel.d}D")
    else:
        X = iid_sample(mu, experiment.N, experiment.seed)
    H = hamiltonian(X, V, kernel)
    results: Dict[str, Any] = {
        "N": X.N,
        "hamiltonian": H,
        "modulated_energy": modulated_energy(X, mu, kernel),
        "equilibrium_energy": equilibrium.energy(),
        "c": equilibrium.c,
    }
    checks = {}
    scale = max(abs(H), 1.0)
    if _flag(experiment.get("splitting", False)):
        relative = splitting_residual(X, equilibrium) / scale
        blowup = blowup_scaling_residual(X, mu, kernel)
        results.update(splitting_residual=relative, blowup_residual=blowup)
        checks["splitting"] = relative <= 1e-8
        checks["blowup_scaling"] = blowup <= 1e-10
    theta = experiment.get("theta")
    if theta is not None:
        n = int(experiment.get("grid", 64))
        thermal = thermal_equilibrium(V, float(theta), kernel=kernel, n=n)
        results["thermal_splitting_residual"] = (
            thermal_splitting_residual(X, thermal) / scale
        )
    return Outcome(results, configurations={"points": X}, checks=checks)


def run_eqmeasure(experiment: ExperimentConfig, threads: int) -> Outcome:
    task = experiment.action
    V, kernel = experiment.potential(), experiment.kernel()
    if task == "obstacle":
        return _obstacle(experiment)
    equilibrium = analytic_equilibrium(V, kernel)
    mu = equilibrium.density
    results: Dict[str, Any] = {
        "density": mu.describe(),
        "c": equilibrium.c,
        "energy": equilibrium.energy(),
        "radius": mu.radius,
        "residual": equilibrium.residual.to_dict(),
    }
    outcome = Outcome(results)
    outcome.checks["euler_lagrange"] = equilibrium.residual.passes(1e-8)
    if task == "el":
        r = np.linspace(0.0, 2 * mu.radius, 201)
        direction = np.eye(kernel.d)[0]
        values = zeta(mu.center + r[:, None] * direction, equilibrium)
        outcome.tables["zeta"] = pd.DataFrame({"r": r, "zeta": values})
        outside = r > mu.radius * (1 + 1e-9)
        results["zeta_min_outside"] = float(values[outside].min())
        outcome.checks["zeta_nonnegative"] = results["zeta_min_outside"] >= -1e-8
    return outcome


def _obstacle(experiment: ExperimentConfig) -> Outcome:
    V = experiment.potential()
    boundary = str(experiment.get("boundary", "charge"))
    if boundary not in BOUNDARY_DATA:
        raise ConfigError(f"task.boundary must be one of {BOUNDARY_DATA}")
    result = obstacle_solve(
        V,
        half_width=float(experiment.get("half_width", 2.0)),
        n=int(experiment.get("grid", 128)),
        c=_optional_float(experiment.get("c")),
        boundary=boundary,
        omega=float(experiment.get("omega", 1.9)),
        tol=float(experiment.get("tol", 1e-8)),
        kernel=experiment.kernel(),
    )
    results: Dict[str, Any] = {
        "c": result.c,
        "mass": result.mass,
        "sweeps": result.sweeps,
        "residual": result.residual,
        "spacing": result.spacing,
        "coincidence_radius": result.coincidence_radius(),
    }
    outcome = Outcome(results, densities={"density": result.density})
    if isinstance(V, RadialPotential) and V.b == 0:
        # the droplet of (k/2)|x|^2 is the disk of radius k^(-1/2)
        radius = V.k**-0.5
        grid = result.density
        nodes = grid.nodes()
        inside = np.linalg.norm(nodes, axis=-1) <= 0.8 * radius
        expected = V.laplacian(nodes[inside]) / coulomb_constant(2)
        error = np.abs(grid.values_grid.ravel()[inside] - expected).max()
        results["interior_error"] = float(error / expected.max())
        outcome.checks["coincidence_radius"] = bool(
            abs(results["coincidence_radius"] - radius) <= result.spacing
        )
        outcome.checks["interior_density"] = results["interior_error"] <= 0.01
    return outcome


def run_thermal(experiment: ExperimentConfig, threads: int) -> Outcome:
    V, kernel = experiment.potential(), experiment.kernel()
    theta = float(experiment.get("theta", 100.0))
    box: Optional[Tuple[float, float]] = None
    if "box" in experiment.task:
        bounds = _floats(experiment.get("box"))
        if bounds.size != 2 or bounds[0] >= bounds[1]:
            raise ConfigError(
                f"task.box must be 'lower,upper', got {bounds.tolist()}"
            )
        box = (float(bounds[0]), float(bounds[1]))
    thermal = thermal_equilibrium(
        V,
        theta,
        kernel=kernel,
        tol=float(experiment.get("tol", 1e-10)),
        max_iter=int(experiment.get("max_iter", 20000)),
        alpha=float(experiment.get("alpha", 0.5)),
        box=box,
        n=int(experiment.get("grid", 128)),
    )
    results: Dict[str, Any] = {
        "theta": theta,
        "c_theta": thermal.c_theta,
        "energy": thermal.energy,
        "iterations": thermal.iterations,
        "residual": thermal.residual,
    }
    outcome = Outcome(results, densities={"density": thermal.density})
    if kernel.is_coulomb:
        radius = float(experiment.get("radius", 0.3))
        nodes = thermal.density.nodes()
        interior = nodes[np.linalg.norm(nodes, axis=-1) <= radius]
        scale = float(expansion_iterate(V, kernel, theta, 0, interior).max())
        deviations = [interior_deviation(thermal, k, radius) for k in (0, 1)]
        results.update(
            deviation_f0=deviations[0], deviation_f1=deviations[1], f0_scale=scale
        )
        outcome.checks["expansion"] = deviations[1] <= 5 * theta**-2 * scale
    return outcome


def _ensemble(
    experiment: ExperimentConfig, kind: str, M: int, threads: int
) -> SampleEnsemble:
    if kind == "ginibre" and experiment.d != 2:
        raise ConfigError("The Ginibre sampler draws planar points; set model.d = 2")
    if kind == "hermite" and experiment.d != 1:
        raise ConfigError("The tridiagonal sampler draws points on a line; set d = 1")
    model = experiment.model()
    mu: Optional[Density]
    try:
        mu = _equilibrium(experiment).density
    except UnsupportedError:
        mu = None
    step = experiment.get("step")
    return SampleEnsemble.generate(
        kind,
        M,
        experiment.N,
        experiment.seed,
        threads,
        beta=model.beta,
        mu=mu,
        model=model,
        n_steps=int(experiment.get("steps", 1000)),
        step=_optional_float(step),
    )


def run_sample(experiment: ExperimentConfig, threads: int) -> Outcome:
    kind = str(experiment.action)
    model = experiment.model()
    if kind == "minimize":
        equilibrium = _equilibrium(experiment)
        X0 = equilibrium.density.sample(model.N, make_rng(experiment.seed, 0))
        X, report = minimize_energy(
            model,
            X0,
            method=str(experiment.get("method", "lbfgs")),
            tol=float(experiment.get("tol", 1e-6)),
            equilibrium=equilibrium,
        )
        outcome = Outcome(report.to_dict(), configurations={"minimizer": X})
        outcome.checks["localization"] = report.localization <= 1e-6
        return outcome
    ensemble = _ensemble(experiment, kind, int(experiment.get("m", 1)), threads)
    energies = np.array([hamiltonian(X, model.V, model.kernel) for X in ensemble])
    results = {
        "sampler": kind,
        "M": len(ensemble),
        "N": model.N,
        "beta": model.beta,
        "hamiltonian_mean": float(energies.mean()),
        "hamiltonian_std": float(energies.std()),
    }
    table = _points_table(ensemble.configurations)
    outcome = Outcome(results, tables={"points": table})
    outcome.checks["finite_energy"] = bool(np.all(np.isfinite(energies)))
    return outcome


def run_dynamics(experiment: ExperimentConfig, threads: int) -> Outcome:
    flow = str(experiment.get("flow", "gradient"))
    integrator = str(experiment.get("integrator", "midpoint"))
    if flow not in FLOWS:
        raise ConfigError(f"task.flow must be one of {FLOWS}")
    if integrator not in INTEGRATORS:
        raise ConfigError(f"task.integrator must be one of {INTEGRATORS}")
    noise = _flag(experiment.get("noise", False))
    report = meanfield_track(
        experiment.model(),
        flow=flow,
        T=float(experiment.get("t", 1.0)),
        step=float(experiment.get("step", 1e-2)),
        integrator=integrator,
        noise=noise,
        seed=experiment.seed,
        record_every=int(experiment.get("record_every", 1)),
    )
    results = {
        "message": report.message,
        "offset": report.offset,
        "rate": report.rate,
        "modulated_energy": [report.modulated[0], report.modulated[-1]],
        "distance": [report.distance[0], report.distance[-1]],
    }
    outcome = Outcome(results, tables={"trajectory": report.series()})
    H = report.hamiltonian
    if not noise and flow == "gradient":
        outcome.checks["energy_decay"] = H[-1] <= H[0]
    elif not noise:
        drift = abs(H[-1] - H[0]) / max(abs(H[0]), 1.0)
        results["energy_drift"] = drift
        outcome.checks["energy_conservation"] = drift <= 1e-3
    return outcome


def _lattice(experiment: ExperimentConfig) -> Lattice:
    d = experiment.d
    covolume = float(experiment.get("covolume", experiment.N))
    tau = experiment.get("tau")
    kind = str(experiment.get("lattice", "cubic" if tau is None else "tau"))
    if kind == "cubic":
        return Lattice.cubic(d, covolume)
    if d != 2:
        raise ConfigError(f"A {kind} lattice is planar; set model.d = 2")
    if kind == "triangular":
        return Lattice.triangular(covolume)
    if kind == "tau" and tau is not None:
        try:
            return Lattice.from_tau(complex(str(tau).replace(" ", "")), covolume)
        except ValueError as err:
            raise ConfigError(f"Bad task.tau {tau!r}: {err}") from err
    raise ConfigError(f"Unknown lattice {kind!r}; use cubic, triangular or tau")


def _torus_config(
    experiment: ExperimentConfig, lattice: Lattice, random: bool = False
) -> TorusConfig:
    "Points from task.points, else a random or a regular start"
    path = experiment.get("points")
    N = int(round(lattice.covolume))
    try:
        if path is not None:
            return TorusConfig(lattice, Configuration.from_csv(path).points)
        if random:
            return TorusConfig.random(lattice, experiment.seed)
        if lattice.d == 1:
            spacing = lattice.basis[0, 0] / N
            return TorusConfig(lattice, spacing * np.arange(N)[:, None])
        if N == 1:
            return TorusConfig(lattice, np.zeros((1, lattice.d)))
        return TorusConfig.random(lattice, experiment.seed)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def run_jellium(experiment: ExperimentConfig, threads: int) -> Outcome:
    task, s, d = experiment.action, experiment.s, experiment.d
    alpha = _optional_float(experiment.get("alpha"))
    if task == "scan":
        return _scan(experiment)
    lattice = _lattice(experiment)
    results: Dict[str, Any] = {"lattice": lattice.basis.tolist()}
    outcome = Outcome(results)
    if task == "green":
        x = _point(experiment.get("x", 0.5), d)
        value = float(green_periodic(lattice, s, x[None], alpha)[0])
        results.update(x=x.tolist(), G=value)
        if d == 1 and s == 0:
            closed = float(green_1d_log(x[0], lattice.basis[0, 0]))
            results["closed_form"] = closed
            outcome.checks["closed_form"] = abs(value - closed) <= 1e-10
    elif task == "madelung":
        value = madelung(lattice, s, alpha)
        results["madelung"] = value
        if d == 1 and s == 0:
            L = float(lattice.basis[0, 0])
            closed = -math.log(2 * math.pi / L) / (2 * math.pi)
            results["closed_form"] = closed
            outcome.checks["closed_form"] = abs(value - closed) <= 1e-9
        elif d == 2 and s == 0:
            # rescaling to covolume one shifts the constant by log(t) / 2 pi
            shift = math.log(lattice.covolume) / (4 * math.pi)
            reference = kronecker_madelung(lattice.tau) + shift
            results["kronecker_limit"] = reference
            outcome.checks["kronecker_limit"] = abs(value - reference) <= 1e-9
    elif task == "W":
        config = _torus_config(experiment, lattice)
        value = W_periodic(config, s, alpha)
        results.update(N=config.N, W=value)
        if d == 1 and s == 0 and experiment.get("points") is None:
            closed = -0.5 * math.log(2 * math.pi)
            results["closed_form"] = closed
            outcome.checks["closed_form"] = abs(value - closed) <= 1e-10
        outcome.configurations["points"] = Configuration(config.points)
    else:
        start = _torus_config(experiment, lattice, random=True)
        tol = float(experiment.get("tol", 1e-10))
        config = optimize_torus(start, s, tol=tol, alpha=alpha)
        value = W_periodic(config, s, alpha)
        gradient = float(np.abs(W_gradient(config, s, alpha)).max())
        results.update(N=config.N, W=value, W_start=W_periodic(start, s, alpha))
        results["gradient"] = gradient
        outcome.checks["descent"] = value <= results["W_start"]
        outcome.checks["critical_point"] = gradient < tol
        outcome.configurations["points"] = Configuration(config.points)
    return outcome


def _scan(experiment: ExperimentConfig) -> Outcome:
    if experiment.d != 2:
        raise ConfigError("The lattice scan runs over planar lattices; set d = 2")
    s = experiment.s
    report = lattice_scan_2d(s, n=int(experiment.get("grid", 50)))
    table = report.table
    triangular = complex(0.5, math.sqrt(3) / 2)
    distance = np.abs(table["tau1"] + 1j * table["tau2"] - triangular)
    nearest = table.loc[distance.idxmin()]
    square = W_periodic(TorusConfig(Lattice.cubic(2), np.zeros((1, 2))), s)
    hexagonal = W_periodic(TorusConfig(Lattice.triangular(), np.zeros((1, 2))), s)
    results = report.to_dict()
    results.update(W_square=square, W_triangular=hexagonal)
    outcome = Outcome(results, tables={"scan": table})
    outcome.checks["argmin_triangular"] = bool(
        abs(report.tau - complex(nearest["tau1"], nearest["tau2"])) < 1e-12
    )
    outcome.checks["square_above_triangular"] = square > hexagonal
    return outcome


def run_stats(experiment: ExperimentConfig, threads: int) -> Outcome:
    task = experiment.action
    kind = str(experiment.get("sampler", "ginibre"))
    if kind not in SAMPLERS:
        raise ConfigError(f"task.sampler must be one of {SAMPLERS}")
    model = experiment.model()
    mu = _equilibrium(experiment).density
    ensemble = _ensemble(experiment, kind, int(experiment.get("m", 100)), threads)
    d = experiment.d
    center = _point(experiment.get("center", 0.0), d)
    radius = float(experiment.get("radius", 0.5 * mu.radius))
    results: Dict[str, Any] = {"sampler": kind, "M": len(ensemble), "N": model.N}
    outcome = Outcome(results)
    if task in ("fluct", "clt"):
        xi = bump(center, radius)
        if task == "clt":
            # Ginibre matrices are the beta = 2 gas whatever model.beta says
            beta = 2.0 if kind == "ginibre" else model.beta
            report = clt_harness(ensemble, mu, xi, beta=beta, s=experiment.s)
            results.update(report.to_dict())
            outcome.checks["clt"] = report.matches_prediction
            return outcome
        values = np.array([fluct(X, mu, xi) for X in ensemble])
        results.update(mean=float(values.mean()), variance=float(values.var(ddof=1)))
        try:
            results["predicted_variance"] = predicted_variance(
                xi, mu, model.beta, experiment.s
            )[0]
        except UnsupportedError as err:
            logger.warning(str(err))
        outcome.tables["fluct"] = pd.DataFrame(
            {"sample": range(len(values)), "fluct": values}
        )
    elif task == "numbervar":
        radii_value = experiment.get("radii")
        if radii_value is None:
            counts = np.geomspace(10, 100, 8)
            radii = mu.radius * (counts / model.N) ** (1.0 / d)
        else:
            radii = _floats(radii_value)
        report = number_variance_curve(ensemble, radii, center)
        results.update(report.to_dict())
        outcome.tables["numbervar"] = report.table()
        if kind == "poisson":
            outcome.checks["poisson_slope"] = abs(report.slope - 1.0) <= 0.1
        else:
            outcome.checks["hyperuniform_slope"] = report.slope <= 0.7
    elif task == "discrepancy":
        values = np.array([discrepancy(X, mu, center, radius) for X in ensemble])
        results.update(
            R=radius, mean=float(values.mean()), variance=float(values.var(ddof=1))
        )
        outcome.tables["discrepancy"] = pd.DataFrame(
            {"sample": range(len(values)), "discrepancy": values}
        )
    else:
        window = float(experiment.get("window", 5.0))
        blown = [local_field(X, center, window, model.N) for X in ensemble]
        counts = np.array([Y.N for Y in blown])
        pairs = np.array([pair_count(Y, 1.0) for Y in blown])
        results.update(
            window=window,
            mean_count=float(counts.mean()),
            mean_close_pairs=float(pairs.mean()),
        )
        outcome.tables["localfield"] = _points_table(blown)
    return outcome


COMMANDS: Dict[str, Callable[[ExperimentConfig, int], Outcome]] = {
    "energy": run_energy,
    "eqmeasure": run_eqmeasure,
    "thermal": run_thermal,
    "sample": run_sample,
    "dynamics": run_dynamics,
    "jellium": run_jellium,
    "stats": run_stats,
}


def write_outputs(experiment: ExperimentConfig, outcome: Outcome) -> List[Path]:
    """Write ``<prefix>_<command>.json`` and the CSV tables of an outcome"""
    directory = experiment.directory
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"{experiment.prefix}_{experiment.command}"
    written = []
    if "json" in experiment.formats:
        path = directory / f"{stem}.json"
        payload = {
            "config": experiment.to_dict(),
            "version": version_stamp(),
            "results": _plain(outcome.results),
            "checks": outcome.checks,
        }
        with open(path, "w") as out:
            json.dump(payload, out, indent=2)
            out.write("\n")
        written.append(path)
    if "csv" in experiment.formats:
        for name, table in outcome.tables.items():
            path = directory / f"{stem}_{name}.csv"
            table.to_csv(path, index=False, float_format=FLOAT_FORMAT)
            written.append(path)
        for name, X in outcome.configurations.items():
            path = directory / f"{stem}_{name}.csv"
            X.to_csv(path)
            written.append(path)
        for name, density in outcome.densities.items():
            path = directory / f"{stem}_{name}.csv"
            density.to_csv(path)
            written.append(path)
    return written


def run(experiment: ExperimentConfig, check: bool = False, threads: int = 1) -> int:
    """Run one experiment, write its artifacts and return the exit code"""
    try:
        outcome = COMMANDS[experiment.command](experiment, threads)
    except RieszLabError as err:
        logger.error(f"{experiment.command} failed: {err}")
        return err.exit_code
    except ValueError as err:
        # library argument checks on values the config layer does not bound
        config_error = ConfigError(str(err))
        logger.error(f"{experiment.command} failed: {config_error}")
        return config_error.exit_code
    for path in write_outputs(experiment, outcome):
        logger.info(f"Wrote {path}")
    if check and outcome.failed:
        err = AcceptanceError(outcome.failed)
        logger.error(str(err))
        return err.exit_code
    return 0


def _dispatch(
    ctx: click.Context,
    command: str,
    action: Optional[str] = None,
    **options: Any,
) -> int:
    session: Session = ctx.obj
    overrides = list(session.overrides)
    keys = {
        "N": "model.N",
        "beta": "model.beta",
        "M": "task.m",
        "grid": "task.grid",
        "sampler": "task.sampler",
        "theta": "task.theta",
        "steps": "task.steps",
    }
    for name, value in options.items():
        if value is None or value is False:
            continue
        key = keys.get(name, f"task.{name}")
        overrides.append(f"{key}={'true' if value is True else value}")
    parser = load_config(session.config_path, overrides)
    experiment = ExperimentConfig.from_parser(parser, command, action)
    logger.info(f"Running {command} {action or ''} with seed {experiment.seed}")
    return run(experiment, session.check, session.threads)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE")
@click.option("--output-dir", type=click.Path(file_okay=False))
@click.option("--seed", type=int)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--check", is_flag=True, help="Exit with 4 if acceptance checks fail")
@click.option("--verbose", "-v", is_flag=True)
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[str],
    overrides: Sequence[str],
    output_dir: Optional[str],
    seed: Optional[int],
    threads: int,
    check: bool,
    verbose: bool,
) -> None:
    """Numerical experiments on Coulomb and Riesz gases."""
    logging.basicConfig(
        format="[%(levelname) 5s/%(asctime)s] %(name)s: %(message)s",
        level=logging.DEBUG if verbose else logging.INFO,
    )
    extra = list(overrides)
    if output_dir is not None:
        extra.append(f"output.directory={output_dir}")
    if seed is not None:
        extra.append(f"model.seed={seed}")
    ctx.obj = Session(config_path, extra, threads, check)


@cli.command()
@click.option("--N", "N", type=int)
@click.option("--splitting", is_flag=True, help="Check the splitting identities")
@click.option("--theta", type=float)
@click.pass_context
def energy(
    ctx: click.Context, N: Optional[int], splitting: bool, theta: Optional[float]
) -> int:
    """H_N, F_N and splitting residuals of a configuration."""
    return _dispatch(ctx, "energy", N=N, splitting=splitting, theta=theta)


@cli.command()
@click.argument("task", type=click.Choice(EQMEASURE_TASKS))
@click.option("--grid", type=int)
@click.pass_context
def eqmeasure(ctx: click.Context, task: str, grid: Optional[int]) -> int:
    """Equilibrium measures: closed form, E-L profile or obstacle solver."""
    return _dispatch(ctx, "eqmeasure", task, grid=grid)


@cli.command()
@click.option("--theta", type=float)
@click.option("--grid", type=int)
@click.pass_context
def thermal(ctx: click.Context, theta: Optional[float], grid: Optional[int]) -> int:
    """Thermal equilibrium measure and its high-temperature expansion."""
    return _dispatch(ctx, "thermal", theta=theta, grid=grid)


@cli.command()
@click.argument("kind", type=click.Choice(SAMPLERS))
@click.option("--N", "N", type=int)
@click.option("--M", "M", type=int)
@click.option("--beta")
@click.option("--steps", type=int)
@click.pass_context
def sample(
    ctx: click.Context,
    kind: str,
    N: Optional[int],
    M: Optional[int],
    beta: Optional[str],
    steps: Optional[int],
) -> int:
    """Draw configurations from a Gibbs measure or an exact ensemble."""
    return _dispatch(ctx, "sample", kind, N=N, M=M, beta=beta, steps=steps)


@cli.command()
@click.option("--N", "N", type=int)
@click.option("--flow", type=click.Choice(FLOWS))
@click.pass_context
def dynamics(ctx: click.Context, N: Optional[int], flow: Optional[str]) -> int:
    """Track the modulated energy along a mean-field particle flow."""
    return _dispatch(ctx, "dynamics", N=N, flow=flow)


@cli.command()
@click.argument("task", type=click.Choice(JELLIUM_TASKS))
@click.option("--N", "N", type=int)
@click.option("--grid", type=int)
@click.pass_context
def jellium(
    ctx: click.Context, task: str, N: Optional[int], grid: Optional[int]
) -> int:
    """Periodic Green functions, Madelung constants and lattice energies."""
    return _dispatch(ctx, "jellium", task, N=N, grid=grid)


@cli.command()
@click.argument("task", type=click.Choice(STATS_TASKS))
@click.option("--sampler", type=click.Choice(SAMPLERS))
@click.option("--N", "N", type=int)
@click.option("--M", "M", type=int)
@click.option("--beta")
@click.pass_context
def stats(
    ctx: click.Context,
    task: str,
    sampler: Optional[str],
    N: Optional[int],
    M: Optional[int],
    beta: Optional[str],
) -> int:
    """Fluctuations, CLT harness, number variance, discrepancy, local fields."""
    return _dispatch(ctx, "stats", task, sampler=sampler, N=N, M=M, beta=beta)


def main(args: Optional[List[str]] = None) -> int:
    """Console script for rieszlab."""
    try:
        rv = cli.main(args=args, prog_name="rieszlab", standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as err:
        err.show()
        return err.exit_code
    except RieszLabError as err:
        logger.error(str(err))
        return err.exit_code
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())  # pragma: no cover
