"""Thermal equilibrium measures.

mu_theta minimizes E_theta(mu) = E(mu) + (1/theta) int mu log mu and satisfies
h^mu + V + (1/theta) log mu = c_theta everywhere, i.e.
mu = exp(-theta (h^mu + V)) / Z. The solver iterates this relation in log
space on a gridded density with damping chosen so that E_theta never
increases.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from .density import Density, GriddedDensity
from .equilibrium import energy_functional
from .errors import ConvergenceError, UnsupportedError
from .kernels import RieszKernel, riesz_constant
from .potentials import Potential
from .util import as_points

logger = logging.getLogger(__name__)


def thermal_energy(
    mu: Density, theta: float, V: Potential, kernel: RieszKernel
) -> float:
    "E_theta(mu) = E(mu) + (1/theta) int mu log mu"
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    return energy_functional(mu, V, kernel) + mu.entropy() / theta


@dataclass
class ThermalResult:
    density: GriddedDensity
    #: log mu_theta at the cell centres
    log_values: np.ndarray
    c_theta: float
    theta: float
    kernel: RieszKernel
    potential: Potential
    #: E_theta of the final iterate
    energy: float
    #: sup-norm Euler-Lagrange residual after each accepted step
    history: List[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def residual(self) -> float:
        return self.history[-1] if self.history else math.inf

    def log_density(self, x: np.ndarray) -> np.ndarray:
        "log mu_theta(x) = theta (c_theta - h(x) - V(x)), valid off the grid too"
        points = as_points(x, self.density.d)
        h = self.density.potential(self.kernel, points)
        return self.theta * (self.c_theta - h - self.potential.value(points))

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(x))


def _normalize(u: np.ndarray, cell_volume: float) -> np.ndarray:
    return u - special.logsumexp(u) - math.log(cell_volume)


def default_box(
    V: Potential, theta: float, kernel: RieszKernel
) -> Tuple[float, float]:
    """Symmetric interval holding the droplet and its thermal tail.

    The droplet radius R solves R^p |grad V(R e_1)| = m, with p = d - 1 and
    m = 1 for Coulomb kernels (Gauss law) and p = 1, m = 2 for the 1D log gas.
    Beyond R, mu_theta decays like exp(-theta k (r - R)^2) with
    k = Delta V(R e_1) / d, so the tail is cut where that factor is exp(-30).
    """
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    d = kernel.d
    one_dimensional_log = d == 1 and kernel.is_log
    power, mass = (1, 2.0) if one_dimensional_log else (d - 1, 1.0)
    e1 = np.eye(d)[:1]

    def flux(r: float) -> float:
        return r**power * float(np.linalg.norm(V.gradient(r * e1))) - mass

    upper = 1.0
    while flux(upper) < 0:
        upper *= 2
        if upper > 1e6:
            raise UnsupportedError(f"{V.describe()} is too weak to size a box")
    R = float(optimize.brentq(flux, 1e-12, upper))
    try:
        k = float(V.laplacian(R * e1)[0]) / d
    except UnsupportedError:
        k = 1.0
    half = R + math.sqrt(30.0 / (theta * max(k, 1e-12)))
    return (-half, half)


def thermal_equilibrium(
    V: Potential,
    theta: float,
    grid: Optional[GriddedDensity] = None,
    kernel: Optional[RieszKernel] = None,
    tol: float = 1e-10,
    max_iter: int = 20000,
    alpha: float = 0.5,
    min_alpha: float = 1e-8,
    box: Optional[Tuple[float, float]] = None,
    n: int = 128,
) -> ThermalResult:
    """Solve the Gibbs relation for mu_theta on a grid.

    Without a grid the density lives on the cube box^d, by default the one
    from ``default_box``.

    Each step moves u = log mu toward -theta (V + h^mu) - log Z with weight
    alpha. Steps that increase E_theta are rejected and alpha is halved;
    alpha is also halved when the residual grows and otherwise grown by 20%
    up to its starting value.
    """
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if grid is None:
        d = 2 if kernel is None else kernel.d
        if box is None:
            box = default_box(V, theta, kernel or RieszKernel(d, 0))
        lower, upper = (box[0],) * d, (box[1],) * d
        grid = GriddedDensity.from_function(
            lambda x: np.exp(-theta * (V.value(x) - np.min(V.value(x)))),
            lower,
            upper,
            n,
        )
    mesh: GriddedDensity = grid
    interaction = RieszKernel(mesh.d, 0) if kernel is None else kernel
    if interaction.d != mesh.d:
        raise UnsupportedError(f"{interaction} does not match a {mesh.d}D grid")
    vol = mesh.cell_volume
    v_grid = V.value(mesh.nodes()).reshape(mesh.shape)

    def evaluate(u: np.ndarray) -> Tuple[np.ndarray, float, float, np.ndarray]:
        mu = np.exp(u)
        h = mesh.grid_potential(interaction, mu)
        energy = float(np.sum(mu * (0.5 * h + v_grid + u / theta)) * vol)
        c_theta = float(np.sum(mu * (h + v_grid + u / theta)) * vol)
        target = _normalize(-theta * (v_grid + h), vol)
        return target, energy, c_theta, h

    with np.errstate(divide="ignore"):
        u = _normalize(np.log(mesh.values_grid), vol)
    if not np.all(np.isfinite(u)):
        u = _normalize(-theta * v_grid, vol)
    target, energy, c_theta, _ = evaluate(u)
    residual = float(np.abs(target - u).max()) / theta
    history: List[float] = []
    start_alpha = alpha
    for iteration in range(max_iter):
        if residual < tol:
            break
        trial = _normalize((1 - alpha) * u + alpha * target, vol)
        trial_target, trial_energy, trial_c, _ = evaluate(trial)
        if trial_energy > energy + 1e-13 * max(1.0, abs(energy)):
            alpha /= 2
            if alpha < min_alpha:
                raise ConvergenceError(
                    f"Thermal iteration stalled at residual {residual:.3g}", history
                )
            continue
        trial_residual = float(np.abs(trial_target - trial).max()) / theta
        if trial_residual > residual:
            alpha = max(alpha / 2, min_alpha)
        else:
            alpha = min(start_alpha, 1.2 * alpha)
        u, target, energy, c_theta = trial, trial_target, trial_energy, trial_c
        residual = trial_residual
        history.append(residual)
        logger.debug(
            f"iteration {iteration}: E_theta={energy:.15g}, residual={residual:.3g}, "
            f"alpha={alpha:.3g}"
        )
    else:
        raise ConvergenceError(
            f"Thermal iteration did not reach {tol} in {max_iter} steps", history
        )
    logger.info(
        f"thermal equilibrium at theta={theta:g}: c_theta={c_theta:.12g}, "
        f"residual {residual:.3g} after {len(history)} steps"
    )
    density = mesh.with_values(np.exp(u))
    return ThermalResult(density, u, c_theta, theta, interaction, V, energy, history)


def _kirkwood_monroe_constant(kernel: RieszKernel) -> float:
    if not kernel.is_coulomb:
        raise UnsupportedError(f"Kirkwood-Monroe iterates need Coulomb, not {kernel}")
    return riesz_constant(kernel.d, kernel.s)


def expansion_iterate(
    V: Potential,
    kernel: RieszKernel,
    theta: float,
    k: int,
    x: np.ndarray,
    delta: float = 1e-2,
) -> np.ndarray:
    """Iterates f_0 = Delta V / c_d and f_{k+1} = f_0 + Delta log f_k / (theta c_d)

    The Laplacian of log f_k is taken by nested central differences of step
    delta, so the cost grows like (2d + 1)^k.
    """
    if k < 0:
        raise ValueError(f"Iterate index must be nonnegative, got {k}")
    c_d = _kirkwood_monroe_constant(kernel)
    points = as_points(x, kernel.d)
    shifts = delta * np.eye(kernel.d)

    def iterate(level: int, y: np.ndarray) -> np.ndarray:
        base = V.laplacian(y) / c_d
        if level == 0:
            return base

        def log_f(z: np.ndarray) -> np.ndarray:
            return np.log(iterate(level - 1, z))

        centre = log_f(y)
        lap = np.zeros(len(y))
        for e in shifts:
            lap += (log_f(y + e) - 2 * centre + log_f(y - e)) / delta**2
        return base + lap / (theta * c_d)

    return iterate(k, points)


def interior_deviation(
    result: ThermalResult,
    k: int,
    radius: float,
    center: Optional[Sequence[float]] = None,
) -> float:
    "sup over grid nodes within radius of |mu_theta - f_k|"
    grid = result.density
    nodes = grid.nodes()
    c = np.zeros(grid.d) if center is None else np.asarray(center, float)
    inside = np.linalg.norm(nodes - c, axis=-1) <= radius
    expected = expansion_iterate(
        result.potential, result.kernel, result.theta, k, nodes[inside]
    )
    return float(np.abs(grid.values_grid.ravel()[inside] - expected).max())
