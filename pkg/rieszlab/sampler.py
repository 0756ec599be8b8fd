"""Samplers for the Gibbs measure exp(-beta N^{-s/d} H_N).

Approximate chains (overdamped Langevin and MALA), exact random-matrix
samplers for the log gases at beta = 2 in the plane and any beta on the line,
and energy minimization for beta = infinity.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from scipy import integrate, linalg, optimize

from .density import Density
from .equilibrium import EquilibriumResult, analytic_equilibrium, zeta
from .errors import BlowUpError, LineSearchError, SingularEvaluationError
from .kernels import RieszKernel
from .modenergy import ConfigLike, Configuration, _points, hamiltonian
from .potentials import Potential
from .reports import MinimizerReport
from .util import eval_formula, make_rng, pair_differences

logger = logging.getLogger(__name__)


@dataclass
class GibbsModel:
    kernel: RieszKernel
    V: Potential
    #: inverse temperature; math.inf for the ground state
    beta: float
    N: int

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.N < 1:
            raise ValueError(f"N must be positive, got {self.N}")

    @classmethod
    def from_formula(
        cls, kernel: RieszKernel, V: Potential, beta: Union[str, float], N: int
    ) -> "GibbsModel":
        "beta given as a number or a formula in N such as '2*log(N)'"
        return cls(kernel, V, eval_formula(beta, N=N), N)

    @property
    def d(self) -> int:
        return self.kernel.d

    @property
    def theta(self) -> float:
        "Effective temperature beta N^{1 - s/d}"
        return self.beta * self.N ** (1 - self.kernel.s / self.kernel.d)

    @property
    def integrable(self) -> bool:
        "Registered potentials grow fast enough for a finite partition function"
        return self.V.growth == "confining"

    def log_density(self, points: np.ndarray) -> float:
        "Unnormalized log Gibbs density -(theta/N) H_N"
        return -self.theta / self.N * hamiltonian(points, self.V, self.kernel)

    def describe(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "s": self.kernel.s,
            "beta": self.beta,
            "N": self.N,
            "theta": self.theta,
            "potential": self.V.describe(),
        }


@dataclass
class ChainState:
    points: np.ndarray
    rng: np.random.Generator
    step_size: float
    step: int = 0
    accepted: int = 0
    proposed: int = 0
    #: configurations recorded along the run
    samples: List[np.ndarray] = field(default_factory=list)

    @property
    def configuration(self) -> Configuration:
        return Configuration(self.points)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 1.0


def _interaction_gradient(points: np.ndarray, kernel: RieszKernel) -> np.ndarray:
    "sum_{j != i} grad g(x_i - x_j), with nan on coincident pairs when s >= 0"
    diff = pair_differences(points)
    r2 = np.sum(diff**2, axis=-1)
    np.fill_diagonal(r2, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = -np.power(r2, -(kernel.s + 2) / 2)
    np.fill_diagonal(scale, 0.0)
    return np.einsum("ij,ijd->id", scale, diff)


def force(X: ConfigLike, model: GibbsModel) -> np.ndarray:
    """F_i = -(1/N) grad_{x_i} H_N

    = -(1/N) sum_{j != i} grad g(x_i - x_j) - grad V(x_i)
    """
    points = _points(X, model.d)
    N = len(points)
    interaction = _interaction_gradient(points, model.kernel)
    if not np.all(np.isfinite(interaction)):
        raise SingularEvaluationError("Force evaluated at a coincident configuration")
    return -interaction / N - model.V.gradient(points)


def _safe_force(points: np.ndarray, model: GibbsModel) -> np.ndarray:
    interaction = _interaction_gradient(points, model.kernel)
    return -interaction / len(points) - model.V.gradient(points)


def default_step(model: GibbsModel, X0: ConfigLike) -> float:
    "h = 0.1 / (N^{2/d} (1 + sup |Delta V|)) with the sup taken over X0 and the origin"
    points = np.concatenate([_points(X0, model.d), np.zeros((1, model.d))])
    lap = float(np.max(np.abs(model.V.laplacian(points))))
    return 0.1 / (model.N ** (2 / model.d) * (1 + lap))


def _start(
    model: GibbsModel, X0: ConfigLike, step: Optional[float], seed: int, stream: int
) -> ChainState:
    points = np.array(_points(X0, model.d), dtype=float)
    if len(points) != model.N:
        raise ValueError(f"Start has {len(points)} points, expected {model.N}")
    h = default_step(model, points) if step is None else float(step)
    if h <= 0:
        raise ValueError(f"Step size must be positive, got {h}")
    return ChainState(points, make_rng(seed, stream), h)


def langevin_run(
    model: GibbsModel,
    X0: ConfigLike,
    step: Optional[float] = None,
    n_steps: int = 1000,
    seed: int = 0,
    stream: int = 0,
    record_every: int = 0,
    burn_in: int = 0,
    bound: Optional[float] = None,
    max_halvings: int = 10,
) -> ChainState:
    """Euler-Maruyama for dx_i = F_i dt + sqrt(2/theta) dW_i

    Steps leaving the ball of radius ``bound`` or producing non-finite
    coordinates are undone and the step size halved.
    """
    state = _start(model, X0, step, seed, stream)
    limit = bound or 100 * max(1.0, float(np.abs(state.points).max()))
    noise = math.sqrt(2 / model.theta) if math.isfinite(model.theta) else 0.0
    halvings = 0
    while state.step < n_steps:
        h = state.step_size
        xi = state.rng.standard_normal(state.points.shape)
        with np.errstate(all="ignore"):
            trial = state.points + h * _safe_force(state.points, model)
            trial += math.sqrt(h) * noise * xi
        if not np.all(np.isfinite(trial)) or np.abs(trial).max() > limit:
            halvings += 1
            if halvings > max_halvings:
                raise BlowUpError("Langevin chain left the domain", state.step)
            state.step_size = h / 2
            logger.warning(
                f"Langevin blow-up at step {state.step}; "
                f"step size now {state.step_size:.3g}"
            )
            continue
        state.points = trial
        state.step += 1
        if record_every and state.step > burn_in and state.step % record_every == 0:
            state.samples.append(state.points.copy())
    return state


def _proposal_log_density(
    model: GibbsModel, y: np.ndarray, x: np.ndarray, fx: np.ndarray, h: float
) -> float:
    "log q(y | x) up to a constant"
    return -model.theta * float(np.sum((y - x - h * fx) ** 2)) / (4 * h)


def mala_run(
    model: GibbsModel,
    X0: ConfigLike,
    step: Optional[float] = None,
    n_steps: int = 1000,
    seed: int = 0,
    stream: int = 0,
    record_every: int = 0,
    burn_in: int = 0,
) -> ChainState:
    """Metropolis-adjusted Langevin chain targeting exp(-(theta/N) H_N)"""
    state = _start(model, X0, step, seed, stream)
    h = state.step_size
    x = state.points
    log_pi = model.log_density(x)
    fx = _safe_force(x, model)
    for _ in range(n_steps):
        xi = state.rng.standard_normal(x.shape)
        y = x + h * fx + math.sqrt(2 * h / model.theta) * xi
        u = 1.0 - state.rng.random()
        state.proposed += 1
        with np.errstate(all="ignore"):
            log_pi_y = model.log_density(y)
            fy = _safe_force(y, model)
        if np.isfinite(log_pi_y) and np.all(np.isfinite(fy)):
            log_ratio = (
                log_pi_y
                - log_pi
                + _proposal_log_density(model, x, y, fy, h)
                - _proposal_log_density(model, y, x, fx, h)
            )
            if math.log(u) < log_ratio:
                x, fx, log_pi = y, fy, log_pi_y
                state.accepted += 1
        state.step += 1
        if record_every and state.step > burn_in and state.step % record_every == 0:
            state.samples.append(x.copy())
    state.points = x
    if state.acceptance_rate < 0.01:
        logger.warning(
            f"MALA acceptance {state.acceptance_rate:.3%} with step {h:.3g}; "
            "reduce the step size"
        )
    else:
        logger.debug(f"MALA acceptance {state.acceptance_rate:.3%}")
    return state


def ginibre_sample(N: int, seed: int = 0, stream: int = 0) -> Configuration:
    """Eigenvalues of an N x N matrix with i.i.d. complex Gaussian entries of
    variance 1/N, as points in the plane
    """
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    rng = make_rng(seed, stream)
    A = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(
        2 * N
    )
    eigenvalues = linalg.eigvals(A)
    points = np.stack([eigenvalues.real, eigenvalues.imag], axis=-1)
    return Configuration(points, {"sampler": "ginibre", "seed": seed, "beta": 2})


def hermite_beta_sample(
    N: int, beta: float, seed: int = 0, stream: int = 0
) -> Configuration:
    """Eigenvalues of the tridiagonal beta-Hermite model, scaled so that the
    empirical measure tends to the semicircle on [-2, 2]
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    rng = make_rng(seed, stream)
    diagonal = rng.normal(0.0, math.sqrt(2.0), size=N) / math.sqrt(2)
    off = np.sqrt(rng.chisquare(beta * np.arange(N - 1, 0, -1))) / math.sqrt(2)
    eigenvalues = linalg.eigvalsh_tridiagonal(diagonal, off) if N > 1 else diagonal
    points = np.sort(eigenvalues) * math.sqrt(2 / (beta * N))
    metadata = {"sampler": "hermite", "seed": seed, "beta": beta}
    return Configuration(points[:, None], metadata)


def poisson_sample(
    mu: Density, N: int, seed: int = 0, stream: int = 0
) -> Configuration:
    "Poisson process with intensity N mu"
    rng = make_rng(seed, stream)
    count = int(rng.poisson(N))
    points = mu.sample(count, rng).reshape(count, mu.d)
    return Configuration(points, {"sampler": "poisson"})


def iid_sample(mu: Density, N: int, seed: int = 0, stream: int = 0) -> Configuration:
    rng = make_rng(seed, stream)
    return Configuration(mu.sample(N, rng), {"sampler": "iid"})


def _gradient_h(points: np.ndarray, model: GibbsModel) -> np.ndarray:
    return -model.N * _safe_force(points, model)


def minimize_energy(
    model: GibbsModel,
    X0: ConfigLike,
    method: str = "lbfgs",
    tol: float = 1e-6,
    max_iter: int = 20000,
    equilibrium: Optional[EquilibriumResult] = None,
) -> Tuple[Configuration, MinimizerReport]:
    """Minimize H_N from X0 by backtracking gradient descent ("gd") or L-BFGS.

    The report carries the localization max zeta(x_i), which needs the
    equilibrium measure, and the separation min |x_i - x_j| N^{1/d}.
    """
    points = np.array(_points(X0, model.d), dtype=float)
    shape = points.shape
    kernel, V = model.kernel, model.V
    if method == "gd":
        energy = hamiltonian(points, V, kernel)
        eta = 1.0 / model.N
        iterations = 0
        for iterations in range(1, max_iter + 1):
            grad = _gradient_h(points, model)
            if np.abs(grad).max() < tol:
                break
            norm2 = float(np.sum(grad**2))
            while True:
                trial = points - eta * grad
                trial_energy = hamiltonian(trial, V, kernel)
                if trial_energy <= energy - 1e-4 * eta * norm2:
                    break
                eta /= 2
                if eta < 1e-16:
                    raise LineSearchError(
                        f"Backtracking failed at iteration {iterations}, H_N={energy}"
                    )
            points, energy = trial, trial_energy
            eta *= 2
            logger.debug(f"gd iteration {iterations}: H_N={energy:.15g}")
        residual = float(np.abs(_gradient_h(points, model)).max())
        if residual >= tol:
            raise LineSearchError(
                f"Gradient descent stopped after {iterations} iterations with "
                f"|grad H|={residual:.3g}"
            )
    elif method == "lbfgs":

        def objective(flat: np.ndarray) -> Tuple[float, np.ndarray]:
            x = flat.reshape(shape)
            with np.errstate(all="ignore"):
                return hamiltonian(x, V, kernel), _gradient_h(x, model).ravel()

        res = optimize.minimize(
            objective,
            points.ravel(),
            jac=True,
            method="L-BFGS-B",
            options={"gtol": tol, "ftol": 1e-15, "maxiter": max_iter, "maxcor": 20},
        )
        points = res.x.reshape(shape)
        iterations = int(res.nit)
        residual = float(np.abs(_gradient_h(points, model)).max())
        if not res.success and residual > tol:
            raise LineSearchError(
                f"L-BFGS stopped with |grad H|={residual:.3g}: {res.message}"
            )
    else:
        raise ValueError(f"Unknown minimization method {method!r}")

    configuration = Configuration(points, {"sampler": f"minimize-{method}"})
    energy = hamiltonian(points, V, kernel)
    if equilibrium is None:
        try:
            equilibrium = analytic_equilibrium(V, kernel)
        except NotImplementedError:
            equilibrium = None
    localization = (
        math.nan if equilibrium is None else float(np.max(zeta(points, equilibrium)))
    )
    separation = configuration.min_gap() * model.N ** (1 / model.d)
    report = MinimizerReport(energy, localization, separation, iterations)
    logger.info(str(report))
    return configuration, report


def pair_distance_law(model: GibbsModel, edges: Sequence[float]) -> np.ndarray:
    """Probabilities of |x_1 - x_2| falling in each bin for the two-particle
    Gibbs measure on the line, by direct quadrature
    """
    if model.N != 2 or model.d != 1:
        raise ValueError("The pair distance law is computed for N = 2 in one dimension")
    weight = model.theta / model.N

    def density(m: float, r: float) -> float:
        points = np.array([[m + r / 2], [m - r / 2]])
        with np.errstate(all="ignore"):
            value = math.exp(-weight * hamiltonian(points, model.V, model.kernel))
        return value

    # extent where the one-body confinement weight exp(-2 weight N V) is negligible
    reach = 1.0
    while weight * model.N * float(model.V.value(np.array([[reach]]))[0]) < 60:
        reach *= 1.5

    def marginal(r: float) -> float:
        return integrate.quad(lambda m: density(m, r), -reach, reach, limit=200)[0]

    edges = np.asarray(edges, dtype=float)
    total = integrate.quad(marginal, 0, 2 * reach, limit=200)[0]
    probs = [
        integrate.quad(marginal, lo, hi, limit=200)[0] / total
        for lo, hi in zip(edges[:-1], edges[1:])
    ]
    return np.array(probs)


#: sampler kinds understood by SampleEnsemble.generate
SAMPLERS = ("ginibre", "hermite", "poisson", "iid", "langevin", "mala", "minimize")


@dataclass
class SampleEnsemble:
    "Independent configurations of one model with their provenance"

    configurations: List[Configuration]
    seeds: List[Tuple[int, int]]
    sampler: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shapes = {c.d for c in self.configurations}
        if len(shapes) > 1:
            raise ValueError(f"Ensemble mixes dimensions {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configurations)

    @property
    def d(self) -> int:
        return self.configurations[0].d

    @classmethod
    def generate(
        cls,
        kind: str,
        M: int,
        N: int,
        seed: int = 0,
        threads: int = 1,
        beta: float = 2.0,
        mu: Optional[Density] = None,
        model: Optional[GibbsModel] = None,
        n_steps: int = 1000,
        step: Optional[float] = None,
    ) -> "SampleEnsemble":
        """Draw M samples; sample i uses the random stream i of ``seed``.

        Results are returned in stream order whatever the number of threads.
        """
        if kind not in SAMPLERS:
            raise ValueError(f"Unknown sampler {kind!r}; expected one of {SAMPLERS}")
        draw = _sample_function(kind, N, seed, beta, mu, model, n_steps, step)
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            configurations = list(pool.map(draw, range(M)))
        if M < 50:
            logger.warning(f"Ensemble of {M} samples is under-powered for statistics")
        params = {"N": N, "beta": beta, "n_steps": n_steps, "step": step}
        return cls(configurations, [(seed, i) for i in range(M)], kind, params)


def _sample_function(
    kind: str,
    N: int,
    seed: int,
    beta: float,
    mu: Optional[Density],
    model: Optional[GibbsModel],
    n_steps: int,
    step: Optional[float],
) -> Callable[[int], Configuration]:
    if kind == "ginibre":
        return lambda i: ginibre_sample(N, seed, i)
    if kind == "hermite":
        return lambda i: hermite_beta_sample(N, beta, seed, i)
    if kind in ("poisson", "iid"):
        if mu is None:
            raise ValueError(f"The {kind} sampler needs a reference density")
        sample = poisson_sample if kind == "poisson" else iid_sample
        reference = mu
        return lambda i: sample(reference, N, seed, i)
    if model is None:
        raise ValueError(f"The {kind} sampler needs a Gibbs model")
    gibbs = model
    start_density = (
        mu if mu is not None else analytic_equilibrium(gibbs.V, gibbs.kernel).density
    )

    def chain(i: int) -> Configuration:
        # stream 2i seeds the start, stream 2i + 1 drives the chain
        X0 = start_density.sample(N, make_rng(seed, 2 * i))
        if kind == "langevin":
            state = langevin_run(gibbs, X0, step, n_steps, seed, 2 * i + 1)
        elif kind == "mala":
            state = mala_run(gibbs, X0, step, n_steps, seed, 2 * i + 1)
        else:
            return minimize_energy(gibbs, X0)[0]
        return Configuration(state.points, {"sampler": kind, "seed": seed, "stream": i})

    return chain
