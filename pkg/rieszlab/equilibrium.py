"""Equilibrium measures, energy functionals and the effective potential zeta.

The equilibrium measure mu_V minimizes E(mu) = 1/2 int int g dmu dmu + int V dmu
and is characterized by h^mu + V = c on its support and >= c elsewhere.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .density import AnalyticDensity, Density, GriddedDensity, Semicircle, UniformBall
from .errors import UnsupportedError
from .kernels import RieszKernel
from .potentials import Potential, RadialPotential
from .reports import ResidualReport
from .util import as_points, integer_shell

logger = logging.getLogger(__name__)


@dataclass
class EquilibriumResult:
    density: Density
    c: float
    residual: ResidualReport
    kernel: RieszKernel
    potential: Potential

    def energy(self) -> float:
        return energy_functional(self.density, self.potential, self.kernel)


def potential_of_density(mu: Density, kernel: RieszKernel, x: np.ndarray) -> np.ndarray:
    "h^mu(x) = int g(x - y) dmu(y)"
    return mu.potential(kernel, as_points(x, mu.d))


def energy_functional(mu: Density, V: Potential, kernel: RieszKernel) -> float:
    "E(mu) = 1/2 int int g dmu dmu + int V dmu"
    return 0.5 * mu.self_energy(kernel) + mu.integrate(V.value)


def _directions(d: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        phi = 2 * math.pi * np.arange(16) / 16
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    shell = integer_shell(d, 1).astype(float)
    return shell / np.linalg.norm(shell, axis=-1, keepdims=True)


def check_points(mu: Density, n: int = 40) -> Tuple[np.ndarray, np.ndarray]:
    """Points inside and outside the support where the E-L conditions are checked"""
    if isinstance(mu, GriddedDensity):
        nodes = mu.nodes()
        inside = mu.values_grid.ravel() > 0
        return nodes[inside], nodes[~inside]
    directions = _directions(mu.d)
    radii_in = mu.radius * np.linspace(0, 1, n + 1)
    radii_out = mu.radius * np.linspace(1, 3, n + 1)[1:]
    inner = mu.center + (radii_in[:, None, None] * directions[None]).reshape(-1, mu.d)
    outer = mu.center + (radii_out[:, None, None] * directions[None]).reshape(-1, mu.d)
    return inner, outer


def el_residual(
    mu: Density, V: Potential, kernel: RieszKernel, c: float
) -> Tuple[float, float]:
    """(sup over the support of |h + V - c|, min of h + V - c off the support)"""
    inside, outside = check_points(mu)
    on = np.abs(mu.potential(kernel, inside) + V.value(inside) - c)
    off = mu.potential(kernel, outside) + V.value(outside) - c
    return float(on.max()), float(off.min()) if len(off) else 0.0


def analytic_equilibrium(V: Potential, kernel: RieszKernel) -> EquilibriumResult:
    """Closed-form equilibrium measure for the quadratic family V = (k/2)|x|^2

    Coulomb kernels give a uniform ball of density k d / c_d and radius
    k^{-1/d}; the one-dimensional log kernel gives a semicircle of radius
    sqrt(2/k).
    """
    if not isinstance(V, RadialPotential) or V.b != 0:
        raise UnsupportedError(f"No closed-form equilibrium measure for {V.describe()}")
    mu: AnalyticDensity
    if kernel.is_coulomb:
        mu = UniformBall(kernel.d, V.k ** (-1.0 / kernel.d))
    elif kernel.d == 1 and kernel.s == 0:
        mu = Semicircle(math.sqrt(2.0 / V.k))
    else:
        raise UnsupportedError(f"No closed-form equilibrium measure for {kernel}")
    c = mu.self_energy(kernel) + mu.integrate(V.value)
    residual = ResidualReport(*el_residual(mu, V, kernel, c))
    logger.info(f"{type(mu).__name__} radius {mu.radius:.6g}, c={c:.12g}; {residual}")
    return EquilibriumResult(mu, c, residual, kernel, V)


def zeta(
    x: np.ndarray, result: EquilibriumResult, V: Optional[Potential] = None
) -> np.ndarray:
    "Effective potential h^{mu_V} + V - c; zero on the droplet, positive outside"
    V = result.potential if V is None else V
    points = as_points(x, result.density.d)
    return result.density.potential(result.kernel, points) + V.value(points) - result.c
