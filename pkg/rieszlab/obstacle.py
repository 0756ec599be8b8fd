"""Classical obstacle problem for the two-dimensional log gas.

The potential h = h^{mu_V} is the smallest superharmonic function lying above
the obstacle psi = c - V, i.e. it solves min(-Delta h, h - psi) = 0. The
equilibrium measure is recovered as mu = -Delta h / 2pi and the constant c is
fixed by requiring mu to have mass one.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .density import GriddedDensity
from .errors import CoincidenceSetError, ConvergenceError, UnsupportedError
from .kernels import RieszKernel
from .potentials import Potential

logger = logging.getLogger(__name__)

#: Dirichlet data on the box boundary
BOUNDARY_DATA = ("charge", "zero")


@dataclass
class ObstacleResult:
    #: node coordinates along each axis
    axes: Tuple[np.ndarray, np.ndarray]
    #: h on the node grid, boundary included
    solution: np.ndarray
    obstacle: np.ndarray
    #: nodes where h = psi
    coincidence: np.ndarray
    density: GriddedDensity
    c: float
    sweeps: int
    #: max |min(-h^2 Delta h, h - psi)| over interior nodes
    residual: float
    mass: float

    @property
    def spacing(self) -> float:
        return float(self.axes[0][1] - self.axes[0][0])

    def coincidence_radius(self) -> float:
        "Largest distance from the origin of a coincidence node"
        xx, yy = np.meshgrid(*self.axes, indexing="ij")
        r = np.hypot(xx, yy)[self.coincidence]
        return float(r.max()) if r.size else 0.0


def _neighbour_sum(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = u[:-2, 1:-1] + u[2:, 1:-1] + u[1:-1, :-2] + u[1:-1, 2:]
    return out


def _stencil(u: np.ndarray) -> np.ndarray:
    "4u - sum of neighbours = -h^2 Delta_h u on interior nodes, 0 on the boundary"
    out = 4 * u - _neighbour_sum(u)
    out[0, :] = out[-1, :] = out[:, 0] = out[:, -1] = 0
    return out


def complementarity_residual(u: np.ndarray, psi: np.ndarray) -> float:
    gap = np.minimum(_stencil(u), u - psi)[1:-1, 1:-1]
    return float(np.abs(gap).max())


def projected_sor(
    u: np.ndarray,
    psi: np.ndarray,
    omega: float = 1.9,
    tol: float = 1e-8,
    max_sweeps: int = 100000,
    check_every: int = 10,
) -> Tuple[np.ndarray, int, float]:
    """Red-black projected SOR for min(-Delta u, u - psi) = 0.

    The boundary values of u are kept fixed. Returns the solution, the number
    of sweeps and the final complementarity residual.
    """
    if not 1.0 <= omega < 2.0:
        raise ValueError(f"Relaxation factor must lie in [1, 2), got {omega}")
    u = u.copy()
    interior = np.zeros(u.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    u[interior] = np.maximum(u[interior], psi[interior])
    ii, jj = np.indices(u.shape)
    colours = [interior & ((ii + jj) % 2 == k) for k in (0, 1)]
    history: List[float] = []
    residual = math.inf
    for sweep in range(1, max_sweeps + 1):
        for mask in colours:
            target = _neighbour_sum(u) / 4
            relaxed = u + omega * (target - u)
            u[mask] = np.maximum(relaxed[mask], psi[mask])
        if sweep % check_every == 0:
            residual = complementarity_residual(u, psi)
            history.append(residual)
            if residual < tol:
                logger.debug(f"projected SOR converged: {sweep} sweeps, {residual:.3g}")
                return u, sweep, residual
    raise ConvergenceError(
        f"Projected SOR did not reach {tol} in {max_sweeps} sweeps", history
    )


def _boundary_values(nodes: np.ndarray, boundary: str) -> np.ndarray:
    if boundary == "zero":
        return np.zeros(nodes.shape[:2])
    r = np.linalg.norm(nodes, axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(r > 0, -np.log(r), 0.0)


def obstacle_solve(
    V: Potential,
    half_width: float = 2.0,
    n: int = 128,
    c: Optional[float] = None,
    boundary: str = "charge",
    omega: float = 1.9,
    tol: float = 1e-8,
    max_sweeps: int = 100000,
    mass_tol: float = 1e-6,
    c_guess: float = 0.0,
    kernel: Optional[RieszKernel] = None,
) -> ObstacleResult:
    """Solve the obstacle problem on the node grid [-L, L]^2 with n^2 nodes.

    With ``c`` given the obstacle is psi = c - V and no mass matching is
    done. Otherwise c is found by bisection so that the recovered measure
    has mass one. The Dirichlet data is the far field -log|x| of a unit
    charge ("charge") or zero ("zero").
    """
    kernel = RieszKernel(2, 0) if kernel is None else kernel
    if (kernel.d, kernel.s) != (2, 0):
        raise UnsupportedError("The obstacle solver handles the 2D log kernel only")
    if boundary not in BOUNDARY_DATA:
        raise ValueError(f"Unknown boundary data {boundary!r}")
    axis = np.linspace(-half_width, half_width, n)
    spacing = float(axis[1] - axis[0])
    nodes = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    v_nodes = V.value(nodes.reshape(-1, 2)).reshape(n, n)
    start = _boundary_values(nodes, boundary)

    def solve(level: float, u0: np.ndarray) -> Tuple[np.ndarray, int, float, float]:
        psi = level - v_nodes
        u, sweeps, residual = projected_sor(u0, psi, omega, tol, max_sweeps)
        mass = float(_stencil(u)[1:-1, 1:-1].sum() / (2 * math.pi))
        logger.debug(f"c={level:.12g}: mass {mass:.10g} after {sweeps} sweeps")
        return u, sweeps, residual, mass

    total = 0
    if c is not None:
        u, total, residual, mass = solve(c, start)
    else:
        u, sweeps, residual, mass = solve(c_guess, start)
        total += sweeps
        lo = hi = c = c_guess
        direction = -1.0 if mass > 1 else 1.0
        width = 1.0
        while (mass - 1) * direction < 0 and abs(mass - 1) >= mass_tol:
            c += direction * width
            width *= 2
            u, sweeps, residual, mass = solve(c, u)
            total += sweeps
            if direction < 0:
                hi, lo = lo, c
            else:
                lo, hi = hi, c
        for _ in range(100):
            if abs(mass - 1) < mass_tol or hi - lo < 1e-13:
                break
            c = 0.5 * (lo + hi)
            u, sweeps, residual, mass = solve(c, u)
            total += sweeps
            if mass > 1:
                hi = c
            else:
                lo = c
        else:
            raise ConvergenceError(f"Mass matching stalled at mass {mass}")
        logger.info(f"obstacle constant c={c:.12g}, mass {mass:.10g}")

    psi = c - v_nodes
    coincidence = np.zeros((n, n), dtype=bool)
    coincidence[1:-1, 1:-1] = (u - psi)[1:-1, 1:-1] <= 1e-10
    ring = np.ones((n - 2, n - 2), dtype=bool)
    ring[1:-1, 1:-1] = False
    if np.any(coincidence[1:-1, 1:-1] & ring):
        raise CoincidenceSetError(
            f"Coincidence set reaches the boundary of [-{half_width}, {half_width}]^2"
        )
    mu = np.clip(_stencil(u)[1:-1, 1:-1], 0, None) / (2 * math.pi * spacing**2)
    lower = (-half_width + spacing / 2,) * 2
    density = GriddedDensity(lower, spacing, mu)
    return ObstacleResult(
        (axis, axis), u, psi, coincidence, density, float(c), total, residual, mass
    )
