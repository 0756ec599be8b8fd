import math

import numpy as np
import pytest

from rieszlab.density import UniformBall
from rieszlab.dynamics import (
    bl_dictionary,
    empirical_distance,
    gronwall_envelope,
    integrate_flow,
    meanfield_track,
    rotation,
)
from rieszlab.modenergy import hamiltonian
from rieszlab.sampler import GibbsModel, iid_sample

from .mocks import quadratic_gas


def planar_model(N: int = 12, beta: float = 2.0) -> GibbsModel:
    kernel, V = quadratic_gas(2)
    return GibbsModel(kernel, V, beta, N)


def start() -> np.ndarray:
    "Four points on a ring of radius 0.3 inside eight on a ring of radius 0.7"
    inner = 2 * np.pi * np.arange(4) / 4 + 0.2
    outer = 2 * np.pi * np.arange(8) / 8
    radii = np.concatenate([np.full(4, 0.3), np.full(8, 0.7)])
    angles = np.concatenate([inner, outer])
    return radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def test_gradient_flow_decreases_energy() -> None:
    model = planar_model()
    run = integrate_flow(model, start(), 0.5, 1e-3, record_every=50)
    energies = [hamiltonian(x, model.V, model.kernel) for x in run.snapshots]
    assert run.times[-1] == pytest.approx(0.5)
    assert energies[-1] < energies[0]
    assert np.all(np.diff(energies) <= 1e-9 * abs(energies[0]))


def test_conservative_flow_conserves_energy() -> None:
    model = planar_model()
    run = integrate_flow(model, start(), 0.5, 1e-3, flow="conservative")
    energies = [hamiltonian(x, model.V, model.kernel) for x in run.snapshots]
    drift = abs(energies[-1] - energies[0]) / abs(energies[0])
    assert drift <= 1e-3
    back = integrate_flow(model, run.final, 0.5, 1e-3, "conservative", reverse=True)
    assert back.final == pytest.approx(start(), abs=1e-3)


def test_flow_rejects() -> None:
    model = planar_model()
    X0 = start()
    with pytest.raises(ValueError):
        integrate_flow(model, X0, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate_flow(model, X0, 1.0, 0.1, flow="hamiltonian")
    with pytest.raises(ValueError):
        integrate_flow(model, X0, 1.0, 0.1, integrator="rk4")
    with pytest.raises(ValueError):
        integrate_flow(model, X0, 1.0, 0.1, reverse=True)
    with pytest.raises(ValueError):
        integrate_flow(model, X0, 1.0, 0.1, "conservative", J=np.eye(2))
    with pytest.raises(ValueError):
        rotation(1)


def test_noise_is_seeded() -> None:
    model = planar_model()
    a = integrate_flow(model, start(), 0.05, 1e-3, noise=True, seed=4)
    b = integrate_flow(model, start(), 0.05, 1e-3, noise=True, seed=4)
    c = integrate_flow(model, start(), 0.05, 1e-3, noise=True, seed=5)
    assert np.array_equal(a.final, b.final)
    assert not np.array_equal(a.final, c.final)


def test_gronwall_envelope() -> None:
    C0, rate, xi = gronwall_envelope([0.0, 1.0, 2.0], [8.0, 16.0, 8.0], 4, 2, 1.0)
    assert C0 == 0
    assert xi == pytest.approx([0.5, 1.0, 0.5])
    assert rate == pytest.approx(math.log(2))
    C0, rate, _ = gronwall_envelope([0.0, 1.0], [-10.0, -12.0], 4, 2, 1.0)
    assert C0 == 2
    assert rate == 0.0


def test_empirical_distance() -> None:
    mu = UniformBall(2)
    nodes, weights = mu.quadrature()
    assert empirical_distance(nodes, mu, weights) == pytest.approx(0.0, abs=1e-12)
    dictionary = bl_dictionary(mu)
    assert all(np.all(np.abs(phi(nodes)) <= 1.0) for phi in dictionary)
    close = empirical_distance(iid_sample(mu, 2000, 1), mu, dictionary=dictionary)
    far = empirical_distance(np.zeros((10, 2)), mu, dictionary=dictionary)
    assert close < 0.1 < far


def test_meanfield_track() -> None:
    model = planar_model(N=16)
    report = meanfield_track(model, T=0.2, step=1e-3, record_every=20, seed=2)
    assert len(report.times) == len(report.modulated) == len(report.distance) == 11
    assert report.hamiltonian[-1] < report.hamiltonian[0]
    assert report.rate >= 0
    assert list(report.series().columns) == ["t", "F_N", "H_N", "bl_distance"]
