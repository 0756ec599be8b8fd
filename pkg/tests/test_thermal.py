import math

import numpy as np
import pytest

from rieszlab.density import GriddedDensity
from rieszlab.errors import UnsupportedError
from rieszlab.kernels import RieszKernel
from rieszlab.potentials import QuadraticPotential, RadialPotential
from rieszlab.thermal import (
    ThermalResult,
    default_box,
    expansion_iterate,
    interior_deviation,
    thermal_energy,
    thermal_equilibrium,
)


def _solve(theta: float = 5.0, n: int = 32) -> ThermalResult:
    return thermal_equilibrium(
        QuadraticPotential(1.0),
        theta,
        kernel=RieszKernel(2, 0),
        tol=1e-8,
        box=(-2.0, 2.0),
        n=n,
    )


def test_fixed_point() -> None:
    result = _solve()
    assert result.residual < 1e-8
    assert result.iterations >= 1
    assert result.density.mass() == pytest.approx(1.0, abs=1e-12)
    nodes = result.density.nodes()
    assert np.allclose(result.log_density(nodes), result.log_values.ravel(), atol=1e-6)
    values = result.density.values_grid.ravel()
    assert np.allclose(result.values(nodes), values, rtol=1e-5)


def test_minimizes_thermal_energy() -> None:
    result = _solve()
    V, kernel = result.potential, result.kernel
    own = thermal_energy(result.density, result.theta, V, kernel)
    assert own == pytest.approx(result.energy, rel=1e-10)
    flat = result.density.with_values(np.ones(result.density.shape) / 16.0)
    assert flat.mass() == pytest.approx(1.0)
    assert thermal_energy(flat, result.theta, V, kernel) > result.energy
    wave = 1 + 0.1 * np.cos(result.density.nodes()[:, 0])
    bumped = result.density.with_values(
        result.density.values_grid * wave.reshape(result.density.shape)
    )
    bumped = bumped.with_values(bumped.values_grid / bumped.mass())
    assert thermal_energy(bumped, result.theta, V, kernel) > result.energy


def test_thermal_rejects() -> None:
    V = QuadraticPotential(1.0)
    with pytest.raises(ValueError):
        thermal_equilibrium(V, 0.0)
    grid = GriddedDensity.from_function(
        lambda x: np.ones(len(x)), (-1.0, -1.0), (1.0, 1.0), 8
    )
    with pytest.raises(UnsupportedError):
        thermal_equilibrium(V, 1.0, grid=grid, kernel=RieszKernel(1, 0))
    with pytest.raises(ValueError):
        thermal_energy(grid, -1.0, V, RieszKernel(2, 0))


def test_expansion_iterates() -> None:
    kernel = RieszKernel(2, 0)
    x = np.array([[0.0, 0.0], [0.3, -0.2]])
    flat = expansion_iterate(QuadraticPotential(1.0), kernel, 50.0, 1, x)
    assert flat == pytest.approx([1 / math.pi] * 2)
    V = RadialPotential(2.0, 0.0625)
    theta = 50.0
    r2 = np.sum(x**2, axis=-1)
    f0 = (4 + r2) / (2 * math.pi)
    assert expansion_iterate(V, kernel, theta, 0, x) == pytest.approx(f0)
    f1 = f0 + 16 / ((4 + r2) ** 2 * 2 * math.pi * theta)
    assert expansion_iterate(V, kernel, theta, 1, x, delta=1e-3) == pytest.approx(
        f1, rel=1e-6
    )
    with pytest.raises(ValueError):
        expansion_iterate(V, kernel, theta, -1, x)
    with pytest.raises(UnsupportedError):
        expansion_iterate(V, RieszKernel(2, 1), theta, 0, x)


@pytest.mark.slow
def test_high_temperature_expansion() -> None:
    theta = 100.0
    V = RadialPotential(2.0, 0.0625)
    kernel = RieszKernel(2, 0)
    result = thermal_equilibrium(V, theta, kernel=kernel, box=(-1.1, 1.1), n=128)
    nodes = result.density.nodes()
    interior = nodes[np.linalg.norm(nodes, axis=-1) <= 0.3]
    scale = expansion_iterate(V, kernel, theta, 0, interior).max()
    first = interior_deviation(result, 1, 0.3)
    assert first <= 5 * theta**-2 * scale
    assert first < interior_deviation(result, 0, 0.3)


def test_default_box() -> None:
    theta = 100.0
    lower, upper = default_box(QuadraticPotential(1.0), theta, RieszKernel(2, 0))
    assert lower == -upper
    assert upper == pytest.approx(1 + math.sqrt(30 / theta))
    # 1D log gas in x^2/4 has the semicircle on [-2, 2]
    half = default_box(QuadraticPotential(0.5), theta, RieszKernel(1, 0))[1]
    assert half == pytest.approx(2 + math.sqrt(60 / theta))
    # lower temperature shrinks the tail
    assert default_box(QuadraticPotential(1.0), 1e4, RieszKernel(2, 0))[1] < upper
    with pytest.raises(ValueError):
        default_box(QuadraticPotential(1.0), 0.0, RieszKernel(2, 0))


def test_default_box_holds_the_tail() -> None:
    theta = 20.0
    V = QuadraticPotential(1.0)
    result = thermal_equilibrium(V, theta, kernel=RieszKernel(2, 0), tol=1e-8, n=32)
    lower, upper = default_box(V, theta, RieszKernel(2, 0))
    assert result.density.lower[0] == pytest.approx(lower)
    values = result.density.values_grid
    # the density on the boundary is negligible against the droplet bulk
    assert values[0, :].max() < 1e-6 * values.max()
    assert values[:, -1].max() < 1e-6 * values.max()
