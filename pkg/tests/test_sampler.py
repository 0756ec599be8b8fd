import math
from typing import Dict, Tuple

import numpy as np
import pytest

from rieszlab.density import UniformBall
from rieszlab.errors import LineSearchError, SingularEvaluationError
from rieszlab.kernels import RieszKernel
from rieszlab.modenergy import hamiltonian
from rieszlab.potentials import QuadraticPotential
from rieszlab.sampler import (
    ChainState,
    GibbsModel,
    SampleEnsemble,
    force,
    ginibre_sample,
    hermite_beta_sample,
    iid_sample,
    langevin_run,
    mala_run,
    minimize_energy,
    pair_distance_law,
    poisson_sample,
)

from rieszlab.statistics import batch_means_error, bump, fluct

from .mocks import equilibrium, quadratic_gas, random_configuration


def gas_model(d: int, N: int, beta: float = 2.0, s: float = 0.0) -> GibbsModel:
    kernel, V = quadratic_gas(d, s)
    return GibbsModel(kernel, V, beta, N)


def test_model() -> None:
    assert gas_model(2, 10).theta == pytest.approx(20.0)
    assert gas_model(3, 8, s=1).theta == pytest.approx(8.0)
    kernel, V = RieszKernel(2, 0), QuadraticPotential()
    model = GibbsModel.from_formula(kernel, V, "log(N)", 8)
    assert model.beta == pytest.approx(math.log(8))
    assert model.integrable
    with pytest.raises(ValueError):
        gas_model(2, 10, beta=0.0)
    with pytest.raises(ValueError):
        gas_model(2, 0)


def test_force() -> None:
    model = gas_model(2, 1)
    assert force(np.array([[1.0, -2.0]]), model) == pytest.approx([[-1.0, 2.0]])
    model = gas_model(2, 2)
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert force(X, model) == pytest.approx([[-0.75, 0.0], [0.75, 0.0]])
    with pytest.raises(SingularEvaluationError):
        force(np.array([[0.0, 0.0], [0.0, 0.0]]), model)


def test_ginibre_sample() -> None:
    X = ginibre_sample(200, seed=3)
    assert X.points.shape == (200, 2)
    assert np.array_equal(X.points, ginibre_sample(200, seed=3).points)
    assert not np.array_equal(X.points, ginibre_sample(200, seed=3, stream=1).points)
    assert np.linalg.norm(X.points, axis=1).max() < 1.35
    assert X.metadata["sampler"] == "ginibre"


def test_hermite_sample() -> None:
    X = hermite_beta_sample(300, 2.0, seed=1)
    assert X.d == 1
    assert np.all(np.diff(X.points[:, 0]) >= 0)
    assert np.abs(X.points).max() < 2.3
    assert np.mean(X.points**2) == pytest.approx(1.0, abs=0.1)
    with pytest.raises(ValueError):
        hermite_beta_sample(10, -1.0)


def test_reference_samplers() -> None:
    mu = UniformBall(2)
    X = iid_sample(mu, 50, seed=2)
    assert X.N == 50 and np.all(mu.in_support(X.points))
    Y = poisson_sample(mu, 50, seed=2)
    assert np.array_equal(Y.points, poisson_sample(mu, 50, seed=2).points)
    assert Y.d == 2


def test_ensemble_order_independent_of_threads() -> None:
    one = SampleEnsemble.generate("ginibre", 6, 12, seed=4, threads=1)
    many = SampleEnsemble.generate("ginibre", 6, 12, seed=4, threads=3)
    assert len(one) == 6
    assert one.seeds == [(4, i) for i in range(6)]
    for a, b in zip(one, many):
        assert np.array_equal(a.points, b.points)
    with pytest.raises(ValueError):
        SampleEnsemble.generate("bogus", 2, 4)
    with pytest.raises(ValueError):
        SampleEnsemble.generate("iid", 2, 4)


def test_minimizer_localization() -> None:
    model = gas_model(2, 16, beta=math.inf)
    X0 = random_configuration(16, 2, seed=7, spread=0.5)
    X, report = minimize_energy(model, X0)
    assert report.localization <= 1e-6
    assert report.separation > 0.5
    assert report.hamiltonian <= hamiltonian(X0, model.V, model.kernel)
    assert np.linalg.norm(X.points, axis=1).max() <= 1.001


def test_descent_matches_lbfgs() -> None:
    model = gas_model(2, 3, beta=math.inf)
    X0 = random_configuration(3, 2, seed=1, spread=0.5)
    _, gd = minimize_energy(model, X0, method="gd", tol=1e-7)
    _, lbfgs = minimize_energy(model, X0, tol=1e-7)
    assert gd.hamiltonian == pytest.approx(lbfgs.hamiltonian, rel=1e-8)
    with pytest.raises(ValueError):
        minimize_energy(model, X0, method="newton")


def test_descent_reports_unconverged_runs() -> None:
    model = gas_model(2, 16, beta=math.inf)
    X0 = random_configuration(16, 2, seed=7, spread=0.5)
    with pytest.raises(LineSearchError):
        minimize_energy(model, X0, method="gd", tol=1e-9, max_iter=3)


def test_langevin_halves_unstable_step() -> None:
    model = gas_model(2, 8)
    X0 = random_configuration(8, 2, seed=3)
    state = langevin_run(model, X0, step=10.0, n_steps=50, seed=0)
    assert state.step == 50
    assert state.step_size < 2.0
    assert np.all(np.isfinite(state.points))
    with pytest.raises(ValueError):
        langevin_run(model, X0.points[:3], n_steps=1)


def test_chains_are_reproducible() -> None:
    model = gas_model(1, 5)
    X0 = random_configuration(5, 1, seed=2)
    a = mala_run(model, X0, step=0.01, n_steps=200, seed=9)
    b = mala_run(model, X0, step=0.01, n_steps=200, seed=9)
    assert np.array_equal(a.points, b.points)
    assert 0 < a.acceptance_rate <= 1
    c = langevin_run(model, X0, n_steps=100, seed=9, record_every=10)
    assert len(c.samples) == 10


@pytest.mark.slow
def test_mala_pair_distance() -> None:
    model = gas_model(1, 2)
    edges = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 6.0]
    expected = pair_distance_law(model, edges)
    assert sum(expected) == pytest.approx(1.0, abs=1e-3)
    X0 = np.array([[-0.5], [0.5]])
    state = mala_run(model, X0, step=0.05, n_steps=200000, seed=5, record_every=5)
    gaps = np.array([abs(x[0, 0] - x[1, 0]) for x in state.samples])
    observed = np.histogram(gaps, bins=edges)[0] / len(gaps)
    assert np.abs(observed - expected).max() < 0.03


@pytest.mark.slow
def test_langevin_matches_hermite() -> None:
    N, beta = 8, 2.0
    # E[(1/N) sum x_i^2] = 2/(beta N) + (N-1)/N for the scaled beta-Hermite model
    exact = 2 / (beta * N) + (N - 1) / N
    ensemble = SampleEnsemble.generate("hermite", 2000, N, seed=1, beta=beta)
    moments = [np.mean(X.points**2) for X in ensemble]
    assert np.mean(moments) == pytest.approx(exact, abs=0.03)

    model = gas_model(1, N, beta)
    X0 = hermite_beta_sample(N, beta, seed=2).points
    state = langevin_run(
        model, X0, n_steps=200000, seed=3, record_every=20, burn_in=10000
    )
    langevin = np.mean([np.mean(x**2) for x in state.samples])
    assert langevin == pytest.approx(exact, abs=0.1)


@pytest.mark.slow
def test_ornstein_uhlenbeck_variance() -> None:
    # one particle in x^2/4: dx = -x/2 dt + sqrt(2/beta) dW, variance 2/beta
    beta, h = 2.0, 0.01
    model = gas_model(1, 1, beta)
    state = langevin_run(
        model, np.zeros((1, 1)), step=h, n_steps=500000, seed=4, record_every=10
    )
    x = np.array([sample[0, 0] for sample in state.samples])
    # Euler-Maruyama inflates the stationary variance by 1 / (1 - h/4)
    expected = (2 / beta) / (1 - h / 4)
    assert np.mean(x) == pytest.approx(0.0, abs=0.1)
    assert np.var(x) == pytest.approx(expected, rel=0.15)


def _fluct_moments(values: np.ndarray, chain: bool) -> Tuple[float, ...]:
    "mean, variance of Fluct and their standard errors"
    mean, variance = float(values.mean()), float(values.var(ddof=1))
    if chain:
        mean_error = batch_means_error(values)
        variance_error = batch_means_error((values - mean) ** 2)
    else:
        M = len(values)
        mean_error = math.sqrt(variance / M)
        variance_error = variance * math.sqrt(2 / (M - 1))
    return mean, variance, mean_error, variance_error


def _agree(a: Tuple[float, ...], b: Tuple[float, ...]) -> bool:
    "Means and variances agree within three combined standard errors"
    return all(
        abs(a[i] - b[i]) <= 3 * math.hypot(a[i + 2], b[i + 2]) for i in (0, 1)
    )


@pytest.mark.slow
def test_chains_match_hermite_fluctuations() -> None:
    N, beta = 64, 2.0
    model = gas_model(1, N, beta)
    mu = equilibrium(1).density
    xi = bump([0.0], 1.0)
    ensemble = SampleEnsemble.generate("hermite", 2000, N, seed=11, beta=beta)
    exact = _fluct_moments(np.array([fluct(X, mu, xi) for X in ensemble]), False)

    X0 = hermite_beta_sample(N, beta, seed=12).points
    runs: Dict[str, ChainState] = {
        "langevin": langevin_run(
            model, X0, step=1e-3, n_steps=400000, seed=13, record_every=20
        ),
        "mala": mala_run(
            model, X0, step=1e-3, n_steps=400000, seed=14, record_every=20
        ),
    }
    energies = {}
    for name, state in runs.items():
        values = np.array([fluct(x, mu, xi) for x in state.samples])
        assert _agree(_fluct_moments(values, True), exact), name
        energies[name] = np.mean(
            [hamiltonian(x, model.V, model.kernel) for x in state.samples]
        )
    assert runs["mala"].acceptance_rate > 0.5
    assert energies["langevin"] / N**2 == pytest.approx(
        energies["mala"] / N**2, rel=1e-3
    )


@pytest.mark.slow
def test_minimizer_separation_is_stable() -> None:
    separations = []
    for N in (16, 32, 64, 128):
        model = gas_model(2, N, beta=math.inf)
        X0 = random_configuration(N, 2, seed=N, spread=0.5)
        _, report = minimize_energy(model, X0)
        assert report.localization <= 1e-6, N
        separations.append(report.separation)
    median = float(np.median(separations))
    assert all(abs(a - median) <= 0.3 * median for a in separations), separations
