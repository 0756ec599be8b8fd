import math
from pathlib import Path

import numpy as np
import pytest

from rieszlab.density import GriddedDensity, Semicircle, UniformBall
from rieszlab.errors import UnsupportedError
from rieszlab.kernels import RieszKernel
from rieszlab.util import make_rng


def test_ball_quadrature_moments() -> None:
    for d in (1, 2, 3):
        c = np.full(d, 0.1)
        ball = UniformBall(d, 0.7, center=c)
        _, weights = ball.quadrature()
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        second = ball.integrate(lambda x: np.sum((x - c) ** 2, axis=-1))
        assert second == pytest.approx(d * 0.49 / (d + 2), rel=1e-10)


def test_ball_coulomb_potential() -> None:
    kernel = RieszKernel(2, 0)
    ball = UniformBall(2)
    h = ball.potential(kernel, np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]))
    assert h == pytest.approx([0.5, -math.log(2.0), 0.0])
    for kernel in (RieszKernel(2, 0), RieszKernel(3, 1)):
        ball = UniformBall(kernel.d, 0.8)
        total = ball.integrate(lambda x: ball.potential(kernel, x))
        assert total == pytest.approx(ball.self_energy(kernel), rel=1e-10)
    with pytest.raises(UnsupportedError):
        UniformBall(2).potential(RieszKernel(2, 1), np.zeros((1, 2)))


def test_interval_self_energy() -> None:
    kernel = RieszKernel(1, 0)
    assert UniformBall(1, 0.5).self_energy(kernel) == pytest.approx(1.5)
    ball = UniformBall(1, 1.0)
    total = ball.integrate(lambda x: ball.potential(kernel, x))
    assert total == pytest.approx(ball.self_energy(kernel), rel=1e-3)


def test_semicircle() -> None:
    kernel = RieszKernel(1, 0)
    semi = Semicircle(2.0)
    x = np.linspace(-1.9, 1.9, 7)[:, None]
    assert semi.potential(kernel, x) + x[:, 0] ** 2 / 4 == pytest.approx(0.5)
    total = semi.integrate(lambda y: semi.potential(kernel, y))
    assert total == pytest.approx(semi.self_energy(kernel), abs=1e-12)
    assert semi.self_energy(kernel) == pytest.approx(0.25)
    assert semi.cdf(np.zeros((1, 1)))[0] == pytest.approx(0.5)
    assert semi.ball_mass([0.0], 2.0) == pytest.approx(1.0)
    assert semi.dilate(0.5).radius == 1.0


def test_ball_mass() -> None:
    disk = UniformBall(2)
    assert disk.ball_mass([0.0, 0.0], 0.5) == pytest.approx(0.25)
    lens = (2 * math.pi / 3 - math.sqrt(3) / 2) / math.pi
    assert disk.ball_mass([1.0, 0.0], 1.0) == pytest.approx(lens)
    assert disk.ball_mass([3.0, 0.0], 1.0) == 0.0
    assert disk.ball_mass([0.5, 0.0], 2.0) == 1.0
    assert UniformBall(3).ball_mass([0.0, 0.0, 0.0], 0.5) == pytest.approx(0.125)


def test_dilate_and_sample() -> None:
    disk = UniformBall(2).dilate(2.0)
    assert disk.radius == 2.0
    assert disk.sup() == pytest.approx(1 / (4 * math.pi))
    points = disk.sample(500, make_rng(3))
    assert np.linalg.norm(points, axis=-1).max() <= 2.0
    assert np.array_equal(points, disk.sample(500, make_rng(3)))


def test_gridded_normalization() -> None:
    grid = GriddedDensity.from_function(
        lambda x: np.exp(-np.sum(x**2, axis=-1)), (-2.0, -2.0), (2.0, 2.0), 40
    )
    assert grid.mass() == pytest.approx(1.0, abs=1e-12)
    assert grid.shape == (40, 40)
    assert grid.values(np.array([[5.0, 0.0]]))[0] == 0.0
    with pytest.raises(ValueError):
        GriddedDensity([0.0], 0.1, -np.ones(4))
    with pytest.raises(UnsupportedError):
        GriddedDensity([0.0] * 3, 0.1, np.ones((2, 2, 2)))


def test_gridded_single_cell_potential() -> None:
    values = np.zeros((3, 3))
    values[1, 1] = 100.0
    grid = GriddedDensity([0.0, 0.0], 0.1, values)
    far = np.array([[2.15, 0.15], [0.15, -1.85]])
    assert grid.potential(RieszKernel(2, 0), far) == pytest.approx(
        [-math.log(2.0)] * 2, abs=1e-6
    )


def test_grid_potential_matches_pointwise() -> None:
    for d in (1, 2):
        grid = GriddedDensity.from_function(
            lambda x: 2.5 - np.sum(x**2, axis=-1), (-1.0,) * d, (1.0,) * d, 16
        )
        kernel = RieszKernel(d, 0)
        convolved = grid.grid_potential(kernel).ravel()
        direct = grid.potential(kernel, grid.nodes())
        assert np.allclose(convolved, direct, atol=1e-10)


def test_gridded_csv(tmp_path: Path) -> None:
    grid = GriddedDensity.from_function(
        lambda x: 1 + x[:, 0] ** 2, (-1.0, -0.5), (1.0, 1.5), 8
    )
    path = tmp_path / "density.csv"
    grid.to_csv(path)
    back = GriddedDensity.from_csv(path)
    assert back.shape == grid.shape
    assert np.allclose(back.values_grid, grid.values_grid, rtol=1e-15, atol=0)
    assert np.allclose(back.lower, grid.lower)
