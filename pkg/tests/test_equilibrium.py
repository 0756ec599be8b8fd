import math

import numpy as np
import pytest

from rieszlab.density import Semicircle, UniformBall
from rieszlab.equilibrium import (
    analytic_equilibrium,
    el_residual,
    energy_functional,
    zeta,
)
from rieszlab.errors import UnsupportedError
from rieszlab.kernels import RieszKernel
from rieszlab.potentials import QuadraticPotential, RadialPotential, create_potential
from rieszlab.reports import MinimizerReport, ResidualReport

from .mocks import equilibrium, quadratic_gas


def test_closed_form_families() -> None:
    for (d, s), c in [((2, 0), 0.5), ((3, 1), 1.5), ((1, 0), 0.5), ((1, -1), -0.5)]:
        result = equilibrium(d, s)
        assert result.c == pytest.approx(c, abs=1e-12)
        assert result.residual.passes(1e-8), result.residual
    assert isinstance(equilibrium(1).density, Semicircle)
    assert equilibrium(1).density.radius == pytest.approx(2.0)
    assert isinstance(equilibrium(2).density, UniformBall)


def test_droplet_scales_with_strength() -> None:
    kernel = RieszKernel(2, 0)
    result = analytic_equilibrium(QuadraticPotential(4.0), kernel)
    assert result.density.radius == pytest.approx(0.5)
    assert result.density.sup() == pytest.approx(4.0 / math.pi)


def test_ginibre_energy() -> None:
    kernel, V = quadratic_gas(2)
    assert equilibrium(2).energy() == pytest.approx(0.375, abs=1e-12)
    for t in (0.8, 0.95, 1.05, 1.2):
        assert energy_functional(UniformBall(2, t), V, kernel) > 0.375


def test_zeta_sign() -> None:
    result = equilibrium(2)
    inside = np.array([[0.0, 0.0], [0.5, 0.1], [0.0, -0.99]])
    assert np.allclose(zeta(inside, result), 0.0, atol=1e-12)
    outside = np.array([[1.5, 0.0], [0.0, 2.0]])
    expected = -np.log([1.5, 2.0]) + np.array([1.125, 2.0]) - 0.5
    assert zeta(outside, result) == pytest.approx(expected)
    assert np.all(zeta(outside, result) > 0)


def test_residual_detects_wrong_constant() -> None:
    kernel, V = quadratic_gas(2)
    mu = UniformBall(2)
    on, off = el_residual(mu, V, kernel, 0.5)
    assert on < 1e-12 and off > 0
    on, _ = el_residual(mu, V, kernel, 0.6)
    assert on == pytest.approx(0.1)
    on, _ = el_residual(UniformBall(2, 1.1), V, kernel, 0.5)
    assert on > 1e-3


def test_reports() -> None:
    residual = ResidualReport(0.1, -0.2)
    assert residual.to_dict() == {"on_support": 0.1, "off_support": -0.2}
    assert str(residual) == "E-L residual 0.1 on support, -0.2 off support"
    assert not residual.passes(0.15)
    assert ResidualReport(0.0, 0.0).passes(1e-12)
    report = MinimizerReport(-1.5, 0.0, 1.9, 12)
    assert report.to_dict() == {
        "hamiltonian": -1.5,
        "localization": 0.0,
        "separation": 1.9,
        "iterations": 12,
    }
    assert str(report).startswith("H_N=-1.5 after 12 iterations")


def test_unsupported_families() -> None:
    with pytest.raises(UnsupportedError):
        analytic_equilibrium(QuadraticPotential(1.0), RieszKernel(2, 1))
    with pytest.raises(UnsupportedError):
        analytic_equilibrium(RadialPotential(1.0, 0.1), RieszKernel(2, 0))
    with pytest.raises(UnsupportedError):
        create_potential("coulomb", k=1.0)
    assert create_potential("quartic", k=2.0, b=0.0625).params() == {
        "k": 2.0,
        "b": 0.0625,
    }
